"""Unit conventions.

Inputs follow the laboratory habit of quoting rates as ``2*pi x (value) Hz``
and powers in mW. Internally everything is SI with angular frequencies in
rad/s.
"""
import math

from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import hbar as HBAR

TWO_PI = 2.0 * math.pi

__all__ = [
    "HBAR", "SPEED_OF_LIGHT", "TWO_PI",
    "hz_to_rad_s", "rad_s_to_hz", "khz_to_rad_s", "rad_s_to_khz",
    "mw_to_w", "w_to_mw", "nm_to_m", "m_to_nm", "mm_to_m", "m_to_mm",
    "ng_to_kg", "kg_to_ng", "wavelength_to_angular_frequency",
    "angular_frequency_to_wavelength",
]


def hz_to_rad_s(f):
    return TWO_PI * f


def rad_s_to_hz(w):
    return w / TWO_PI


def khz_to_rad_s(f_khz):
    return TWO_PI * (f_khz * 1e3)


def rad_s_to_khz(w):
    return (w / TWO_PI) / 1e3


def mw_to_w(p_mw):
    return p_mw * 1e-3


def w_to_mw(p_w):
    return p_w / 1e-3


def nm_to_m(x):
    return x * 1e-9


def m_to_nm(x):
    return x / 1e-9


def mm_to_m(x):
    return x * 1e-3


def m_to_mm(x):
    return x / 1e-3


def ng_to_kg(x):
    # 1 ng = 1e-12 kg
    return x * 1e-12


def kg_to_ng(x):
    return x / 1e-12


def wavelength_to_angular_frequency(wavelength_m):
    """omega = 2 pi c / lambda."""
    return TWO_PI * SPEED_OF_LIGHT / wavelength_m


def angular_frequency_to_wavelength(omega):
    return TWO_PI * SPEED_OF_LIGHT / omega
