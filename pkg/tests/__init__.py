"""
ParetoCover Test Suite
"""
