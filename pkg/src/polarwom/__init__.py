"""Non-linear polar codes for asymmetric channels and informed-encoder
(state-aware) coding, with a Monte Carlo construction pipeline and an
end-to-end simulation harness.

The package covers three schemes built on one successive-cancellation engine:

* point-to-point coding over binary asymmetric channels,
* multicoding for channels whose state (known to the encoder only) is a
  stochastically degraded version of the channel output, e.g. rewriting of
  write-once memory with writing noise,
* chained multicoding, which relays the out-of-band side bits of each block
  through the reliable region of the next one.
"""

from .prob import (
    BinaryInputChannel,
    BinaryPmf,
    FinitePmf,
    JointBase,
    bhattacharyya,
    binary_entropy,
    conditional_entropy,
    star_convolve,
    verify_degraded,
)
from .transform import polar_inverse, polar_transform
from .sc import (
    ARGMAX,
    FIXED,
    RANDOM_ROUND,
    DecodeFailure,
    ScContext,
    ScPassResult,
    sc_bruteforce,
    sc_conditional,
    sc_pass,
)
from .models import (
    StateChannelSpec,
    capacity_example2,
    degradation_witness,
    gp_capacity_grid,
    make_asymmetric,
    make_bsc,
    make_example1,
    make_example2,
    make_model,
    sample_state,
    sample_v_given_s,
    simulate_channel,
)
from .profiles import (
    CodeProfile,
    FrozenSearchReport,
    ZProfile,
    estimate_profile,
    load_profile,
    save_profile,
    search_frozen,
    select_sets,
)
from .schemes import (
    ChainProfile,
    SideChannelPayload,
    SimStats,
    c1_decode,
    c1_encode,
    c2_decode,
    c2_encode,
    c3_decode,
    c3_encode,
    effective_rate,
    simulate_blocks,
)

__version__ = "0.1.0"

__all__ = [
    "ARGMAX",
    "BinaryInputChannel",
    "BinaryPmf",
    "ChainProfile",
    "CodeProfile",
    "DecodeFailure",
    "FIXED",
    "FinitePmf",
    "FrozenSearchReport",
    "JointBase",
    "RANDOM_ROUND",
    "ScContext",
    "ScPassResult",
    "SideChannelPayload",
    "SimStats",
    "StateChannelSpec",
    "ZProfile",
    "bhattacharyya",
    "binary_entropy",
    "c1_decode",
    "c1_encode",
    "c2_decode",
    "c2_encode",
    "c3_decode",
    "c3_encode",
    "capacity_example2",
    "conditional_entropy",
    "degradation_witness",
    "effective_rate",
    "estimate_profile",
    "gp_capacity_grid",
    "load_profile",
    "make_asymmetric",
    "make_bsc",
    "make_example1",
    "make_example2",
    "make_model",
    "polar_inverse",
    "polar_transform",
    "sample_state",
    "sample_v_given_s",
    "save_profile",
    "sc_bruteforce",
    "sc_conditional",
    "sc_pass",
    "search_frozen",
    "select_sets",
    "simulate_blocks",
    "simulate_channel",
    "star_convolve",
    "verify_degraded",
    "__version__",
]
