"""Model-independent wrong-way risk for regulatory CVA and accounting CVA/FVA."""

__version__ = "0.1.0"

from .accounting import AcctInputs, AcctResult, XvaTerms, accounting_cva, accounting_fva, accounting_xva
from .calibration import (
    CalibrationConfig, CalibrationSet, ProfilePanel, build_panel, calibrate, calibrate_many,
    crossover_tenor, historical_sd, terminal_correlation,
)
from .errors import CalibrationError, DataError, DomainError, InconsistentMomentsError, InputError, WwrError
from .market import (
    CdsCurve, Fixing, FundingCurve, HazardCurve, HistoryStore, MarketSnapshot, NormalVolSurface, ZeroCurve,
    bootstrap_hazard, discount_factor, forward_default_prob, survival,
)
from .moments import MomentPair, TripleMoments, normal_plus_moments, product_mean_2, product_mean_3, var_product
from .pricing import Direction, ExposureProfile, IrsTrade, Portfolio, bachelier_swaption, exposure_profile, swap_value
from .regulatory import RegInputs, RegResult, crisis_rescale, regulatory_cva
from .structures import TermStructure
from .synthetic import RegimeConfig, Segment, generate
