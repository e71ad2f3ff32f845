"""
Dictionaries, synthetic signals and the experiment engine
"""
