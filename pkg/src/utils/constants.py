import math

PI2 = math.pi**2

# conformal Laplacian of the unit round S^4: L = -Delta + R/6 with R = 12
ROUND_S4_SCALAR_COEFF = 2.0
OMEGA3 = 2 * PI2  # volume of the unit 3-sphere
BUBBLE_C0 = 2 * math.sqrt(2)  # -Delta(delta) = delta^3 in flat 4-space

AMBIENT_DIM = 5
SPHERE_DIM = 4

# geometry
UNIT_NORM_TOL = 1e-12
POLE_TOL = 1e-9
TANGENT_TOL = 1e-10
CUT_LOCUS_MARGIN = 1e-6
EXP_ZERO_TOL = 1e-14
DENOMINATOR_TOL = 1e-300

# critical point search
DEFAULT_STARTS = 4096
DEFAULT_SEED = 0
GRAD_TOL = 1e-9
MERGE_TOL = 1e-5
NONDEGENERACY_TOL = 1e-7
BETA_TOL = 1e-9
MAX_NEWTON_ITERS = 60
MAX_RESTARTS = 2
MAX_NEWTON_STEP = 0.5
POSITIVITY_SAMPLES = 4096
POSITIVITY_POLISH = 32
EULER_CHAR_S4 = 2

# interaction
RHO_TOL = 1e-9
MAX_KPLUS = 20
JACOBI_REL_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

# quadrature
QUAD_REL_TOL = 1e-10

# shadow flow
FLOW_LOCAL_TOL = 1e-8
FLOW_CONCENTRATION_RATIO = 1e-6
FLOW_ESCAPE_RATIO = 10.0
FLOW_BASIN_RADIUS = 0.5
FLOW_WEIGHT_BAND = (0.1, 10.0)
FLOW_MIN_DT = 1e-14
FLOW_MAX_STEPS = 200000
FLOW_HORIZON = 2000.0
FLOW_INITIAL_DT = 1e-2
FLOW_S0 = 0.05

NORMALIZATION_CAVEAT = (
    "Green's function normalized by L G(a,.) = delta_a, i.e. G ~ 1/(4 pi^2 d^2) at the pole; "
    "off-diagonal magnitudes of M (hence rho values) depend on this convention, its sign pattern does not."
)
