"""
ParetoCover - Multiobjective Bayesian optimization with uncertain inputs

Conditional Pareto fronts, coverage probability of conditional Pareto sets
and the PEHVI, WPEHVI and IEHVI acquisition functions on GP surrogates.

Version: 1.0.0
"""

__version__ = '1.0.0'
__author__ = 'ParetoCover'
__status__ = 'Production'

# Core modules available for import
__all__ = [
    'pareto_core',
    'gaussian_process',
    'hypervolume',
    'uncertainty',
    'acquisition',
    'problems',
    'metrics',
    'run_config',
    'run_store',
    'engine',
    'bench',
    'report_generator',
    'pareto_cover'
]
