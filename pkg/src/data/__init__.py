# -*- coding: utf-8 -*-
"""数据层模块"""
