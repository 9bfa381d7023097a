"""Exceptions Package

This package contains all exception classes raised by the memorization laboratory.
The hierarchy roots at LM_Memorization_Exception so callers can catch every laboratory failure at once, while the command line interface reads each class's exit_code.
"""
