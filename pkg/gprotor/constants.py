"""Numerical defaults used throughout gprotor.

Every tolerance and threshold a solver falls back to lives here, so that configuration files and
command-line flags only need to override what they change.
"""

# radial discretization
RADIAL_STEP = 0.01
RADIAL_MARGIN = 40.0  # V(r_max) >= mu_tilde estimate + margin
ENDPOINT_NODES = 6  # nodes used by the high-order quadrature end corrections

# radial minimizer
ENERGY_TOLERANCE = 1e-10
RESIDUAL_TOLERANCE = 1e-8
MAX_ITERATIONS = 20000
INITIAL_TIME_STEP = 1.0
MAX_TIME_STEP = 1e6
MIN_TIME_STEP = 1e-12
CONTINUATION_THRESHOLD = 50.0
CONTINUATION_FACTOR = 4.0

# stability analysis
MIN_CHANNELS = 16
ZERO_MODE_FACTOR = 10.0  # eigenvalues within factor * h**2 of zero are symmetry modes
STABILITY_TOLERANCE = 1e-6
STATIONARITY_TOLERANCE = 1e-6
CONDV_TOLERANCE = 1e-8
EIGEN_MODES = 4  # lowest eigenpairs computed per channel before deflation

# critical frequencies
OMEGA_SCAN_POINTS = 64
OMEGA_SCAN_CUTOFF = 1e3  # upper end of the scan when the trap has infinite critical frequency

# analytic bounds
BOUND_SLACK = -1e-8
XI_BRACKET = (1e-6, 1e9)
XI_TOLERANCE = 1e-12

# 2D minimizer
GRID_POINTS = 128
GRID_MARGIN = 12.0
RESTARTS = 8
RESIDUAL_TOLERANCE_2D = 1e-6
ENERGY_TOLERANCE_2D = 1e-12
MAX_ITERATIONS_2D = 4000
CHANNEL_THRESHOLD = 0.01
GAP_FACTOR = 1e-4  # tol_gap = GAP_FACTOR * |E|
CHANNEL_COPIES = 16  # rotations averaged by the channel projection
BOUNDARY_TOLERANCE = 1e-6
SEED = 0

# density matrix solver
DM_TOLERANCE = 1e-9
DM_MAX_ITERATIONS = 2000
DM_DAMPING = 0.3
DM_STALL_FACTOR = 100.0  # a DM loop with no descent left counts as converged below this * tolerance
MIRROR_TOLERANCE = 1e-10
MIRROR_MAX_ITERATIONS = 5000
RANK_TOLERANCE = 1e-8
SECTOR_WINDOW = 5.0  # energy window above the lowest sector that sets the default j_max
SECTOR_PADDING = 4
