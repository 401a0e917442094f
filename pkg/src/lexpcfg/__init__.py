"""Head-lexicalized PCFG estimation and subcategorization lexicon induction."""
__version__ = '0.1.0'
