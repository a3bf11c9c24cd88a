"""Concrete networked MDPs."""

from .line import line_env
from .sis import SisEnv, sis_env, sis_transition
from .traffic import TrafficEnv, traffic_transition
from .wireless import WirelessGridEnv, aloha_policy, wireless_env, wireless_transition

__all__ = [
    "SisEnv",
    "TrafficEnv",
    "WirelessGridEnv",
    "aloha_policy",
    "line_env",
    "sis_env",
    "sis_transition",
    "traffic_transition",
    "wireless_env",
    "wireless_transition",
]
