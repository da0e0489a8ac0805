"""Domain objects"""
