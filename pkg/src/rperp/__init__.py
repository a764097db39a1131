"""Gaussian rate-distortion under source-uncorrelated distortion: solvers, coder
synthesis and dithered-quantiser simulation."""
from .design import (FeedbackTransformDesign, NoiseShaperDesign, TransformDesign,
                     design_causal_transform, design_feedback_transform, design_noise_shaper,
                     min_phase_spectral_factor)
from .quantizer import (LatticeSpec, ShapedDitheredQuantizer, make_lattice, nearest_point,
                        quantize_subtractive, sample_dither, shaping_from_covariance)
from .rdf import (RdfPoint, optimal_distortion_covariance, shannon_at_distortion,
                  shannon_from_theta, uncorr_at_distortion, uncorr_from_alpha,
                  vector_uncorr_rdf)
from .sim import (SimConfig, SimReport, estimate_psd, estimate_rate, run_feedback_quantizer,
                  run_parallel_bank, run_transform_coder)
from .spectra import ArModel, PsdGrid, ar_to_psd, psd_to_covariance, spd_matrix_sqrt

__version__ = "0.1.0"
