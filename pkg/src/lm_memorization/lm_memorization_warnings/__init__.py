"""
Memorization Warnings Package
=============================

Warning classes for situations that are recorded and recovered from during data preparation, training and analysis.

All warnings inherit from LM_Memorization_Warning, which extends Python's RuntimeWarning.
They are raised with warnings.warn() and can be controlled through the standard warning filters
(warnings.simplefilter('error', Truncated_Sentence_Warning) turns a recovery into a hard failure).
"""
