"""Decentralized symbol detection for extra-large MIMO arrays."""

from .baselines import central_vmp, central_vmp_config, single_user_bound, zf_detect
from .channel import (ChannelRealization, UserChannelSpec, build_covariance,
                      channel_factor, draw_user_specs, dump_matrix,
                      generate_realization, load_matrix, sample_channel,
                      sample_vr, snr_db_to_noise_variance, ula_positions)
from .complexity import complexity_estimates
from .config import SystemConfig, format_config, load_config, parse_config_text
from .harness import (ExperimentResult, PointStats, SerAccumulator,
                      read_results, run_monte_carlo, write_results)
from .model import (ChannelModelError, ConfigError, Constellation,
                    SubArrayIndexing, UnderflowError, belief_mean_var,
                    delta_belief, gaussian_to_belief, normalize, partition)
from .receiver import (ChainResult, LinkMessages, LpuState, MessageTrace,
                       bp_outgoing, combine_belief, lr_metric, mfbp_detect,
                       mrc_initialize, sic_detect_and_cancel,
                       update_noise_precision, vmp_symbol_message)

__version__ = "0.1.0"
