"""Probabilistic forecasting of continuous-intraday electricity price indices.

Submodules: market_data (transaction handling and index reproduction),
merit_order (auction curve elasticity), feature_factory (design
matrices), selection (OMP and lasso), bayes_engine (prior, posterior,
NUTS, predictive mixture), predictive (intervals and sign
probabilities), evaluation (scores and significance tests), synthetic
(data generation), study_runner (scenario orchestration), cli.
"""

__version__ = "0.1.0"
