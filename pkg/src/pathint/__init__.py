"""Pathwise integration along partition sequences: γ-Riemann sums, rough-path lifts, roughness."""

from .errors import GridMismatchError, NumericalError, PathintError, ValidationError
from .grid_paths import (
    SamplePath,
    TimeGrid,
    gen_brownian,
    gen_deterministic,
    gen_fbm,
    gen_ito_euler,
    read_path_csv,
    write_path_csv,
)
from .partitions import (
    Partition,
    PartitionSequence,
    dyadic_sequence,
    equidistant_partition,
    equidistant_sequence,
    lebesgue_sequence,
    control_from_pvar,
    p_variation,
    reference_level,
)
from .riemann import (
    RunningIntegral,
    cauchy_report,
    gamma_quadratic_variation,
    gamma_riemann,
    gamma_riemann_tensor,
    levy_area_sum,
    quadratic_variation,
    sym_antisym,
    uniform_distance,
)

from .rough_path import RieReport, RoughPathLift, equivalence_audit, lift_gamma_rie, rie_check
from .controlled import (
    ControlledPath,
    IntegralResult,
    controlled_from_c2,
    controlled_young,
    follmer_ito_defect,
    pathwise_integral,
    rough_integral,
    stieltjes_qv,
)
from .roughness import (
    RoughnessConfig,
    RoughnessReport,
    align_reference,
    invariance_experiment,
    levy_roughness_stat,
    quadratic_roughness_stat,
    roughness_report,
    triadic_sequence,
)

__version__ = "0.1.0"
