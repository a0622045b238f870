# -*- coding: utf-8 -*-
"""covert-auv 应用包"""
