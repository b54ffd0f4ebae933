"""Exact simulation and transform-domain analytics for order-splitting price impact."""
__version__ = "0.1.0"

from .params import ModelParams, ParameterError, RngStream, sample_duration, sample_rest, sample_sign
from .engine import (PricePath, TraderState, simulate_market, simulate_stationary_window,
                     simulate_trader)
from .estimators import (EnsembleAccumulator, EstimationError, ccdf, ccdf_regression,
                         fit_acf_exponent, fit_loglog_slope, hill_estimator, msd, volatility_acf)
from .analytics import (TheoryPrediction, TransformValue, cgf_lambda, exact_pks, expint,
                        long_rest_pdf, predict)
from .quadrature import QuadratureError

