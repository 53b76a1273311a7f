"""
Configuration for the Duality Tool.
"""
