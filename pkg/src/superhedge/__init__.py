"""Ask and bid prices, superhedging strategies and optimal stopping times
for American options under proportional transaction costs."""

from .buyer import (
    BuyerCertificate,
    check_buyer_superhedge,
    construct_buyer_certificate,
    hedge_buyer,
    price_buyer,
)
from .errors import DegeneratePayoffError, InsufficientEndowmentError, ModelError
from .estimator import AmericanOptionPricer
from .market import (
    EventTree,
    Market,
    MartingalePair,
    MixedStoppingTime,
    PayoffProcess,
    Strategy,
    TreeTooLargeError,
    american_put_physical,
    build_binomial,
    build_trinomial,
    cash_basket,
    is_self_financing,
    no_arbitrage_check,
    two_step_example,
    verify_approx_martingale,
)
from .seller import (
    SellerCertificate,
    check_pure_stopping_gap,
    check_seller_superhedge,
    construct_seller_certificate,
    hedge_seller,
    price_seller_dual,
    price_seller_primal,
)

__all__ = [
    "american_put_physical",
    "AmericanOptionPricer",
    "build_binomial",
    "build_trinomial",
    "BuyerCertificate",
    "cash_basket",
    "check_buyer_superhedge",
    "check_pure_stopping_gap",
    "check_seller_superhedge",
    "construct_buyer_certificate",
    "construct_seller_certificate",
    "DegeneratePayoffError",
    "EventTree",
    "hedge_buyer",
    "hedge_seller",
    "InsufficientEndowmentError",
    "is_self_financing",
    "Market",
    "MartingalePair",
    "MixedStoppingTime",
    "ModelError",
    "no_arbitrage_check",
    "PayoffProcess",
    "price_buyer",
    "price_seller_dual",
    "price_seller_primal",
    "SellerCertificate",
    "Strategy",
    "TreeTooLargeError",
    "two_step_example",
    "verify_approx_martingale",
]

__version__ = "0.1.0"
