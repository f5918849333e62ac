"""Line-panel Type-II codebooks for multi-panel FD-MIMO arrays.

Channel generation, codebook construction and search, zero-forcing sum-rate
evaluation and deep-Q-learning feedback-bit allocation.
"""

from .bitalloc import (AllocBox, QNetwork, RateEvaluator, ReplayBuffer, RLHyperParams,
                       env_step, epsilon_greedy, exhaustive_best, q_train_step, reward,
                       run_algorithm1, train_allocation)
from .channel import (ArrayConfig, ConfigurationError, DomainError, PathLoss,
                      ScenarioParams, generate_channels, line_panel_order)
from .codebook import (BitAllocation, CodebookSpec, DFTCodebook, LinePanelCodebook,
                       TypeIICodebook, lp_bits, lp_search_size, sp_bits, sp_search_size)
from .config import ExperimentConfig, load_config
from .evaluate import LinkBudget, SumRateReport, monte_carlo, sum_rate, zf_precoder
from .kernels import BACKEND
from .quantizer import (QuantizationResult, SearchBudgetExceeded, quantize_dft, quantize_lp,
                        quantize_slp, quantize_sp)

__version__ = "0.1.0"
