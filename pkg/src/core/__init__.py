# -*- coding: utf-8 -*-
"""核心业务逻辑模块"""
