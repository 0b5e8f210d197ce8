from .grid import TimeGrid
from .ensemble import PathEnsemble, FEATURES
from .process import Process1P, Process2P, lower_mask, upper_mask
from .modulus import Modulus, check_modulus, f_example, get_modulus, rho_log1p, standard_moduli
from .weights import WeightProfile, build_weight_profile
from .driver import Driver, Kernel, build_driver, build_kernel, kernel_condition
from .free_term import FreeTerm, build_free_term
