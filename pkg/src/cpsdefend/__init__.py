"""Detect, identify and compensate linear attacks on a sampled control loop."""

from .attack import AttackModel
from .compensate import GainPolicy, PiCompensator, PidGains, char_poly, pid_tf, select_gains, stability_region
from .ident import ArxOrders, ArxRegressor, ArxTheta, RecursiveArx, batch_ls, build_regressor, theta_to_tf
from .ids import DetectorConfig, ResidualDetector
from .lti import Polynomial, TransferFunction, is_stable, polynomial_roots, tf_feedback, tf_series
from .scenarios import golden
from .sim import Scenario, run_scenario, summarize

__version__ = "0.1.0"
