"""Finite-difference gradient check used by the tests."""

import numpy as np

from pysga.analysis import autodiff as ad


def relative_error(aryA, aryB):
    """Relative error of two gradient arrays (norm based)."""
    aryA = np.asarray(aryA, dtype=np.float64)
    aryB = np.asarray(aryB, dtype=np.float64)
    varDen = max(np.linalg.norm(aryA) + np.linalg.norm(aryB), 1e-12)
    return float(np.linalg.norm(aryA - aryB) / varDen)


def check_gradient(funcLoss, lstPrm, varStp=1e-3):
    """
    Compare analytic and central finite-difference gradients.

    Parameters
    ----------
    funcLoss : callable
        Function without arguments returning a scalar tensor.
    lstPrm : list of Tensor
        Tensors requiring gradients.
    varStp : float
        Finite-difference step.

    Returns
    -------
    varErr : float
        Largest relative error over the tensors.
    """
    objTape = ad.get_tape()
    objTape.reset()
    for objPrm in lstPrm:
        objPrm.grad = None
    ad.backward(funcLoss())
    objTape.reset()
    lstErr = []
    for objPrm in lstPrm:
        aryNum = ad.numerical_gradient(funcLoss, objPrm, varStp=varStp)
        aryAna = (np.zeros(objPrm.shape) if objPrm.grad is None
                  else objPrm.grad)
        lstErr.append(relative_error(aryAna, aryNum))
    return max(lstErr)
