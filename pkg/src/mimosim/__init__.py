"""Link-level Monte Carlo simulator for cell-free and multi-cell massive MIMO downlink."""

__version__ = "0.1.0"

from .scenario import (
    CF,
    MC,
    IID_UNIT,
    LARGE_SCALE,
    ScenarioConfig,
    CsitErrorModel,
    ChannelRealization,
    CfGeometry,
    McGeometry,
    place_cf_topology,
    place_mc_topology,
    large_scale_coefficients,
    draw_channel,
    g_tilde,
)
from .precoding import (
    MF,
    ZF,
    MMSE,
    LinkBudget,
    Precoder,
    SingularChannelError,
    mf_precoder,
    zf_precoder,
    mmse_precoder,
    mmse_oracle,
    optimal_receiver_scale,
)
from .power_allocation import (
    TOTAL_POWER,
    PER_ANTENNA,
    PowerAllocation,
    ApaParams,
    AntennaLoad,
    DivergenceError,
    antenna_load,
    upa,
    mse_cost,
    apa_gradient,
    robust_cost,
    robust_gradient,
    per_antenna_projection,
    apa_run,
    rapa_run,
)
from .link import (
    qpsk_modulate,
    qpsk_demodulate,
    transmit,
    receive,
    detect,
    ber_count,
    sum_rate,
)
from .engine import (
    UPA,
    APA,
    RAPA,
    SweepConfig,
    MetricRecord,
    EngineError,
    run_trial,
    run_sweep,
    merge,
)
