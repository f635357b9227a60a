"""Recoil-induced motional states of trapped emitters coupled to photonic waveguides."""

__version__ = "0.1.0"
