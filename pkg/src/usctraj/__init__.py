"""Quantum-trajectory engine for two qubits ultrastrongly coupled to a cavity.

Subpackage map:

- ``hilbert``: truncated cavity (x) qubit (x) qubit space and elementary operators
- ``model``: full and effective Hamiltonians, closed-form couplings, resonance calibration
- ``dressed``: dressed bases and positive-frequency (excitation-annihilating) jump channels
- ``mcwf``: Monte-Carlo wave-function stepping and trajectory records
- ``homodyne``: diffusive and mixed (photodetection + homodyne) unravellings
- ``lme``: dressed-picture Lindblad master-equation integrator
- ``oracles``: closed-form two-level subspace propagators and expectations
- ``stats``: first-jump and conditional second-jump histograms
- ``cli``: reproducible experiment runner
"""

__version__ = "0.1.0"
