"""
Core computation modules for the Duality Tool.
"""
