"""Conformal calibration of score-based selections over sequences of generations.

Typical use::

    from confgen import SelectionSpec, AdmissibilitySpec, calibrate, apply

    sel = SelectionSpec("running_max")
    adm = AdmissibilitySpec("max", a_max=1.0)
    res = calibrate(records, sel, adm, gamma=0.8)
    out = apply(sel, res.lambda_hat, new_record)
"""
from confgen._backend import name as backend_name
from confgen.admissibility import (
    AdmissibilitySpec,
    Agg,
    aggregate,
    build_profiles,
    instance_profile,
)
from confgen.calibrate import (
    CalibrationResult,
    DiagnosticsReport,
    calibrate,
    cp_quantile,
    crc_calibrate,
    upper_bound_diag,
)
from confgen.errors import (
    ConfigurationError,
    ConfGenError,
    StreamingUnsupported,
    ValidationError,
)
from confgen.infer import IterSource, apply, stream_apply
from confgen.records import GenerationRecord, InstanceAdmissibilities
from confgen.selection import (
    Accum,
    Direction,
    ScoreSequence,
    SelectionOutput,
    SelectionSpec,
    Selector,
    breakpoints,
    select,
    stopping_time,
)
from confgen.stepfn import NEG_INF, POS_INF, ExtendedLambda, StepFunction, as_lambda

__version__ = "0.1.0"
