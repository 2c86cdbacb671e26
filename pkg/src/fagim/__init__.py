"""Fluid-antenna grouping-based index modulation (FAG-IM) link-level toolkit."""

from .analysis import abep_upper_bound, mgf_simplified, q_approx
from .channel import CorrelationMatrix, build_correlation_matrix, sample_channel
from .config import SimulationConfig, load_config
from .detectors import detect, detect_ml, detect_mmse, detect_samp
from .errors import ConfigError, NumericalError
from .geometry import FluidAntennaGeometry, GroupingPlan
from .modem import Constellation, FagimScheme, FaimScheme, make_scheme
from .simulate import run_sweep, run_trial, snr_to_noise_variance

__version__ = "0.1.0"
