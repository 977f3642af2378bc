"""Performance modeling of measurement-device-independent multiparty quantum
communication (three users + untrusted middle node with a linear-optical
GHZ-state analyzer): detection statistics, two-decoy single-photon bounds,
secret key rates, and Mermin-value estimates.
"""

__version__ = "0.1.0"
