"""Outage analysis of full-duplex relaying in a Poisson field of interferers."""

from .analytic import (
    Kind,
    OutageValue,
    cf_outage_upper,
    df_outage_exact,
    df_outage_upper,
    df_spatial_contention,
    dt_outage,
    sdf_outage_lower,
)
from .laplace import LaplaceEvaluator, cross_term_f, joint_laplace, marginal_laplace
from .model import LinkGains, NetworkScenario, Protocol, ProtocolParams
from .simulator import estimate_outage, mc_joint_laplace

__all__ = [
    "Kind",
    "LaplaceEvaluator",
    "LinkGains",
    "NetworkScenario",
    "OutageValue",
    "Protocol",
    "ProtocolParams",
    "cf_outage_upper",
    "cross_term_f",
    "df_outage_exact",
    "df_outage_upper",
    "df_spatial_contention",
    "dt_outage",
    "estimate_outage",
    "joint_laplace",
    "marginal_laplace",
    "mc_joint_laplace",
    "sdf_outage_lower",
]
