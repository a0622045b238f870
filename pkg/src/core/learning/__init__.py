# -*- coding: utf-8 -*-
"""H-MAPPO 学习模块：神经网络、PPO/MAPPO 更新、训练循环与评估"""
