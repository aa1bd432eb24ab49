"""
Road renovation scheduling under uncertain infrastructure lifespans
"""

__version__ = "1.0.0"
__author__ = "renosched"
