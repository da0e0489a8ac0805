"""Wire and configuration schemas"""
