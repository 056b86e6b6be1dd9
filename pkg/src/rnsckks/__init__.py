"""RNS-CKKS homomorphic encryption kernels with interchangeable NTT backends."""

from .errors import BatchError, CapacityError, DomainError, ParameterError
from .params import CkksParams, ModulusChain, NttPlan, PRESETS
from .rns import COEFF, NTT, RnsPolynomial, crt_compose, crt_decompose
from .ntt import BACKENDS, TwiddleTable, ntt_forward, ntt_inverse, ntt_oracle
from .ckks import Ciphertext, CkksContext, Plaintext, PublicKey, SecretKey, \
    SwitchingKey
from .batch import BatchBuffer, batched_apply, pack, plan_batch_size, \
    reorder_layout, unpack

__version__ = "0.1.0"

__all__ = [
    "BACKENDS", "BatchBuffer", "BatchError", "CapacityError", "Ciphertext",
    "CkksContext", "CkksParams", "COEFF", "DomainError", "ModulusChain",
    "NTT", "NttPlan", "ParameterError", "Plaintext", "PRESETS", "PublicKey",
    "RnsPolynomial", "SecretKey", "SwitchingKey", "TwiddleTable",
    "batched_apply", "crt_compose", "crt_decompose", "ntt_forward",
    "ntt_inverse", "ntt_oracle", "pack", "plan_batch_size", "reorder_layout",
    "unpack",
]
