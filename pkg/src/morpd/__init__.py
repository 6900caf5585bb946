"""Multi-objective optimal reactive power dispatch toolkit.

Minimizes active power loss and load-voltage deviation over generator
voltage setpoints, transformer taps, and switchable capacitor banks, using
a classification-preselection evolutionary optimizer, then extracts
preference-specific best compromise solutions by fuzzy clustering and grey
relational projection.
"""

from importlib import resources

from .network import (
    Bounds,
    Branch,
    Bus,
    CaseError,
    CaseParseError,
    CaseValidationError,
    ControlVector,
    Generator,
    NetworkCase,
    ShuntBank,
    Transformer,
    apply_controls,
    control_bounds,
    current_controls,
    load_case,
)
from .powerflow import (
    AdmittanceMatrix,
    ObjectivePair,
    PowerFlowSolution,
    ViolationReport,
    active_power_loss,
    build_ybus,
    constraint_violation,
    evaluate,
    solve,
    voltage_deviation,
)

__version__ = "0.1.0"


def bundled_case_path(name: str):
    """Path of a case file shipped with the package ('ieee30', 'ieee118')."""
    ref = resources.files("morpd") / "cases" / f"{name}.case"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled case named {name!r}")
    return ref


def load_bundled_case(name: str) -> NetworkCase:
    """Load one of the case files shipped with the package."""
    return load_case(bundled_case_path(name))
