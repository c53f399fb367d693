"""Numerical special Lagrangian fibrations from torus actions on Calabi-Yau charts."""

from .core import (
    DEFAULT,
    CalabiYauChart,
    DiffConfig,
    DomainError,
    FormEvaluator,
    GeometryError,
    KahlerChart,
    MaxIterations,
    SingularJacobian,
    TorusAction,
    contract,
    exterior_derivative_residual,
    flow_field,
    moment_residual,
    newton_solve,
    to_complex,
    to_real,
)
from .models import (
    CalabiKModel,
    FlatCnModel,
    FubiniStudyModel,
    KNModel,
    compute_t,
    make_calabi_k,
    make_eguchi_hanson,
    make_flat,
    make_fubini_study,
    make_kn,
)
from .report import ResidualReport

__version__ = "0.1.0"
