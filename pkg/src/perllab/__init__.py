"""perl-lab: a workbench for physics-plus-residual predictors.

Library modules:
  funcspace  - scalar targets, Lipschitz estimation, residual construction
  pwl        - piecewise-linear approximation and segment-count search
  gdharness  - gradient descent runs and average-gap bound calculators
  statbounds - concentration/capacity calculators and error measurement
  neural     - from-scratch MLP and LSTM with exact gradients
  physics    - Intelligent Driver Model evaluation, simulation, calibration
  perl       - physics + learned-residual composition and comparisons
  trajdata   - trajectory CSV io, window construction, synthetic generator
  expcli     - experiment runner CLI (CSV + figure outputs)
"""

__version__ = "0.1.0"
