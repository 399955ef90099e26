# -*- coding: utf-8 -*-
"""Learned vector fields and ODE / SDE solvers in latent space."""

# Part of pysga library
#
# This program is free software: you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software
# Foundation, either version 3 of the License, or (at your option) any later
# version.
#
# This program is distributed in the hope that it will be useful, but WITHOUT
# ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS
# FOR A PARTICULAR PURPOSE.  See the GNU General Public License for more
# details.
#
# You should have received a copy of the GNU General Public License along with
# this program.  If not, see <http://www.gnu.org/licenses/>.

from dataclasses import dataclass
import numpy as np

from pysga.analysis import autodiff as ad
from pysga.analysis.encoders import init_linear, linear
from pysga.analysis.utilities import ConfigError, ContractError, ShapeError


# Solver names, by kind of equation:
lstOdeMethods = ['euler', 'adams_bashforth4']
lstSdeMethods = ['euler_maruyama_ito', 'reversible_heun_stratonovich']

# Adams-Bashforth coefficients, most recent evaluation first:
vecAbCoef = np.array([55.0, -59.0, 37.0, -9.0]) / 24.0

# Number of Runge-Kutta steps before the multistep recurrence starts:
varNumBoot = 3

# Gain of the output layer of vector fields (near-zero initial dynamics):
varGainOut = 0.1


# *****************************************************************************
# *** Vector fields

def init_vector_field(dicPrm, strPfx, varDim, varDimHid, objRng):
    """Add an MLP d -> hid -> hid -> d to a parameter dictionary."""
    init_linear(dicPrm, strPfx + '.l1', varDim, varDimHid, objRng)
    init_linear(dicPrm, strPfx + '.l2', varDimHid, varDimHid, objRng)
    init_linear(dicPrm, strPfx + '.l3', varDimHid, varDim, objRng,
                varGain=varGainOut)


class VectorField(object):
    """
    Time-invariant MLP vector field with two tanh hidden layers.

    Parameters
    ----------
    dicPrm : dict
        Model parameters.
    strPfx : str
        Name prefix of the field's parameters.
    """

    def __init__(self, dicPrm, strPfx):
        self.dicPrm = dicPrm
        self.strPfx = strPfx

    def __call__(self, objZ):
        objH = ad.tanh(linear(objZ, self.dicPrm, self.strPfx + '.l1'))
        objH = ad.tanh(linear(objH, self.dicPrm, self.strPfx + '.l2'))
        return linear(objH, self.dicPrm, self.strPfx + '.l3')


@dataclass
class SdeField:
    """Drift and diagonal diffusion of an SDE (callables on tensors)."""

    drift: object
    diffusion: object
# *****************************************************************************


# *****************************************************************************
# *** Solver configuration and Brownian motion

@dataclass(frozen=True)
class SolverSpec:
    """Integration method and step size (in units of one frame)."""

    method: str
    h: float

    def __post_init__(self):
        if self.method not in lstOdeMethods + lstSdeMethods:
            raise ConfigError('Unknown solver: ' + str(self.method))
        if not (self.h > 0.0):
            raise ConfigError('Step size must be positive, got '
                              + str(self.h))

    @property
    def is_sde(self):
        return self.method in lstSdeMethods

    @property
    def substeps(self):
        """Number of steps per frame; 1/h must be an integer."""
        varNum = int(round(1.0 / self.h))
        if varNum < 1 or abs(varNum * self.h - 1.0) >= 1e-6:
            raise ConfigError('Step size ' + str(self.h) + ' does not divide '
                              + 'one frame into an integer number of steps.')
        return varNum


class BrownianPath(object):
    """
    Lazily generated Wiener increments.

    Parameters
    ----------
    varSeed : int
        Seed; increment i is drawn from a generator seeded with
        (varSeed, i), so values do not depend on access order.
    varStp : float
        Step size h; increments are N(0, h) per entry.
    tplShp : tuple
        Shape of one increment (equals the state shape).
    """

    def __init__(self, varSeed, varStp, tplShp):
        self.varSeed = int(varSeed)
        self.h = float(varStp)
        self.shape = tuple(tplShp)
        self._dicInc = {}
        self._aryFix = None

    @classmethod
    def from_increments(cls, aryInc, varStp):
        """Path with given increments, shape [steps, ...]."""
        aryInc = np.asarray(aryInc, dtype=np.float64)
        objPth = cls(0, varStp, aryInc.shape[1:])
        objPth._aryFix = aryInc
        return objPth

    def increment(self, idxStp):
        """Increment W(t_{i+1}) - W(t_i) of step `idxStp`."""
        if self._aryFix is not None:
            if idxStp >= self._aryFix.shape[0]:
                raise ContractError('Brownian path has only '
                                    + str(self._aryFix.shape[0])
                                    + ' increments.')
            return self._aryFix[idxStp]
        aryInc = self._dicInc.get(idxStp)
        if aryInc is None:
            objRng = np.random.default_rng([self.varSeed, int(idxStp)])
            aryInc = np.sqrt(self.h) * objRng.standard_normal(self.shape)
            self._dicInc[idxStp] = aryInc
        return aryInc

    def increments(self, varNumStp):
        """First `varNumStp` increments, shape [steps, ...]."""
        return np.stack([self.increment(idxStp) for idxStp in
                         range(varNumStp)], axis=0)

    def coarsen(self, varFct, varNumStp):
        """
        Path with step size `varFct * h` built from the same increments.

        Parameters
        ----------
        varFct : int
            Number of fine steps per coarse step.
        varNumStp : int
            Number of fine steps to aggregate (multiple of `varFct`).
        """
        assert varNumStp % varFct == 0, 'Steps must be a multiple of factor.'
        aryInc = self.increments(varNumStp)
        aryInc = aryInc.reshape((varNumStp // varFct, varFct) + self.shape)
        return BrownianPath.from_increments(np.sum(aryInc, axis=1),
                                            varFct * self.h)
# *****************************************************************************


# *****************************************************************************
# *** ODE solvers

def rk4_step(funcF, objZ, varStp, objK1=None):
    """One classical Runge-Kutta step; `objK1` is f(z) if already known."""
    if objK1 is None:
        objK1 = funcF(objZ)
    objK2 = funcF(ad.add(objZ, ad.scale(objK1, 0.5 * varStp)))
    objK3 = funcF(ad.add(objZ, ad.scale(objK2, 0.5 * varStp)))
    objK4 = funcF(ad.add(objZ, ad.scale(objK3, varStp)))
    objInc = ad.add(ad.add(objK1, ad.scale(objK2, 2.0)),
                    ad.add(ad.scale(objK3, 2.0), objK4))
    return ad.add(objZ, ad.scale(objInc, varStp / 6.0))


def adams_bashforth_step(objZ, lstFHist, varStp):
    """
    One explicit 4-step Adams-Bashforth step.

    Parameters
    ----------
    objZ : Tensor
        Current state z_n.
    lstFHist : list of Tensor
        [f_n, f_{n-1}, f_{n-2}, f_{n-3}], most recent first.
    varStp : float
        Step size h.

    Returns
    -------
    objZnew : Tensor
        z_n + h (55 f_n - 59 f_{n-1} + 37 f_{n-2} - 9 f_{n-3}) / 24.
    """
    if len(lstFHist) != len(vecAbCoef):
        raise ContractError('Adams-Bashforth step needs '
                            + str(len(vecAbCoef)) + ' past evaluations.')
    objInc = ad.scale(lstFHist[0], vecAbCoef[0])
    for varCoef, objF in zip(vecAbCoef[1:], lstFHist[1:]):
        objInc = ad.add(objInc, ad.scale(objF, varCoef))
    return ad.add(objZ, ad.scale(objInc, varStp))


def ode_solve(funcF, objZ0, varHrz, objSpec):
    """
    Integrate dz/dt = f(z) over `varHrz` frames.

    Parameters
    ----------
    funcF : callable
        Vector field, Tensor -> Tensor of the same shape.
    objZ0 : Tensor
        Initial state (last observed representation), e.g. shape [N, d].
    varHrz : int
        Number of future frames (>= 1).
    objSpec : SolverSpec
        'euler' or 'adams_bashforth4' with step size h (1/h integer).

    Returns
    -------
    lstZ : list of Tensor
        States at frame times 1 .. varHrz. All steps are recorded on the tape.

    Notes
    -----
    Adams-Bashforth is bootstrapped with Runge-Kutta steps for the first three
    substeps of the trajectory; the history of f evaluations then carries over
    frame boundaries.
    """
    if varHrz < 1:
        raise ContractError('ode_solve needs a horizon of at least 1.')
    if objSpec.method not in lstOdeMethods:
        raise ConfigError('Solver ' + objSpec.method + ' is not an ODE '
                          + 'method.')
    varStp = objSpec.h
    if objSpec.method == 'adams_bashforth4' and varStp >= 1.0:
        raise ConfigError('Adams-Bashforth needs a step size below one '
                          + 'frame (got ' + str(varStp) + ').')
    varNumSub = objSpec.substeps

    objZ = objZ0
    lstFHist = []
    lstZ = []
    for idxStp in range(varHrz * varNumSub):
        objF = funcF(objZ)
        if objSpec.method == 'euler':
            objZ = ad.add(objZ, ad.scale(objF, varStp))
        else:
            lstFHist = [objF] + lstFHist[:len(vecAbCoef) - 1]
            if idxStp < varNumBoot:
                objZ = rk4_step(funcF, objZ, varStp, objK1=objF)
            else:
                objZ = adams_bashforth_step(objZ, lstFHist, varStp)
        if (idxStp + 1) % varNumSub == 0:
            lstZ.append(objZ)
    return lstZ
# *****************************************************************************


# *****************************************************************************
# *** SDE solvers

def _check_path(objZ0, objSpec, objPath):
    """Step size and shape agreement of state and Brownian path."""
    if not np.isclose(objPath.h, objSpec.h, rtol=0.0, atol=1e-12):
        raise ContractError('Brownian path step ' + str(objPath.h)
                            + ' differs from solver step '
                            + str(objSpec.h))
    if tuple(objPath.shape) != tuple(objZ0.shape):
        raise ShapeError('sde_solve: Brownian path shape '
                         + str(objPath.shape) + ' differs from state shape '
                         + str(objZ0.shape))


def _diffusion(objFld, objZ):
    """Evaluate the diagonal diffusion and check its shape."""
    objSig = objFld.diffusion(objZ)
    if objSig.shape != objZ.shape:
        raise ShapeError('sde_solve: diffusion output ' + str(objSig.shape)
                         + ' differs from state ' + str(objZ.shape))
    return objSig


def _heun_forward(objFld, objY, objYh, objMu, objSig, aryDw, varStp):
    """One reversible Heun step; returns (y, y_hat, mu, sigma) at n + 1."""
    objYhNew = ad.add(ad.sub(ad.scale(objY, 2.0), objYh),
                      ad.add(ad.scale(objMu, varStp), ad.mul(objSig, aryDw)))
    objMuNew = objFld.drift(objYhNew)
    objSigNew = _diffusion(objFld, objYhNew)
    objYNew = ad.add(objY, ad.add(
        ad.scale(ad.add(objMu, objMuNew), 0.5 * varStp),
        ad.mul(ad.scale(ad.add(objSig, objSigNew), 0.5), aryDw)))
    return objYNew, objYhNew, objMuNew, objSigNew


def _heun_reverse(objFld, objY, objYh, objMu, objSig, aryDw, varStp):
    """Inverse of `_heun_forward` along the same increment."""
    objYhOld = ad.sub(ad.sub(ad.scale(objY, 2.0), objYh),
                      ad.add(ad.scale(objMu, varStp), ad.mul(objSig, aryDw)))
    objMuOld = objFld.drift(objYhOld)
    objSigOld = _diffusion(objFld, objYhOld)
    objYOld = ad.sub(objY, ad.add(
        ad.scale(ad.add(objMu, objMuOld), 0.5 * varStp),
        ad.mul(ad.scale(ad.add(objSig, objSigOld), 0.5), aryDw)))
    return objYOld, objYhOld, objMuOld, objSigOld


def _heun_run(objFld, objZ0, varNumStp, varStp, objPath):
    """Forward reversible Heun; returns boundary states and final state."""
    objY = objZ0
    objYh = objZ0
    objMu = objFld.drift(objYh)
    objSig = _diffusion(objFld, objYh)
    lstY = []
    for idxStp in range(varNumStp):
        objY, objYh, objMu, objSig = _heun_forward(
            objFld, objY, objYh, objMu, objSig, objPath.increment(idxStp),
            varStp)
        lstY.append(objY)
    return lstY, (objY, objYh, objMu, objSig)


def sde_solve(objFld, objZ0, varHrz, objSpec, objPath):
    """
    Integrate dz = mu(z) dt + sigma(z) dW over `varHrz` frames.

    Parameters
    ----------
    objFld : SdeField
        Drift and diagonal diffusion.
    objZ0 : Tensor
        Initial state.
    varHrz : int
        Number of future frames (>= 1).
    objSpec : SolverSpec
        'euler_maruyama_ito' (Ito, left endpoint) or
        'reversible_heun_stratonovich' (Stratonovich).
    objPath : BrownianPath
        Wiener increments with the solver's step size and the state's shape.

    Returns
    -------
    lstZ : list of Tensor
        States at frame times 1 .. varHrz.
    """
    if varHrz < 1:
        raise ContractError('sde_solve needs a horizon of at least 1.')
    if objSpec.method not in lstSdeMethods:
        raise ConfigError('Solver ' + objSpec.method + ' is not an SDE '
                          + 'method.')
    _check_path(objZ0, objSpec, objPath)
    varStp = objSpec.h
    varNumSub = objSpec.substeps
    varNumStp = varHrz * varNumSub

    if objSpec.method == 'reversible_heun_stratonovich':
        lstY, _ = _heun_run(objFld, objZ0, varNumStp, varStp, objPath)
        return lstY[varNumSub - 1::varNumSub]

    objZ = objZ0
    lstZ = []
    for idxStp in range(varNumStp):
        objDrf = ad.scale(objFld.drift(objZ), varStp)
        objDif = ad.mul(_diffusion(objFld, objZ), objPath.increment(idxStp))
        objZ = ad.add(objZ, ad.add(objDrf, objDif))
        if (idxStp + 1) % varNumSub == 0:
            lstZ.append(objZ)
    return lstZ


def reverse_heun_roundtrip(objFld, objZ0, varHrz, objSpec, objPath,
                           objPathBwd=None):
    """
    Integrate forward with reversible Heun, then backward to the start.

    Parameters
    ----------
    objFld : SdeField
        Drift and diagonal diffusion.
    objZ0 : Tensor
        Initial state.
    varHrz : int
        Number of frames.
    objSpec : SolverSpec
        Must use 'reversible_heun_stratonovich'.
    objPath : BrownianPath
        Increments of the forward pass.
    objPathBwd : BrownianPath or None
        Increments of the backward pass (default: `objPath`).

    Returns
    -------
    objZrec : Tensor
        Reconstructed initial state.
    """
    if objSpec.method != 'reversible_heun_stratonovich':
        raise ConfigError('Roundtrip needs the reversible Heun solver.')
    _check_path(objZ0, objSpec, objPath)
    if objPathBwd is None:
        objPathBwd = objPath
    varStp = objSpec.h
    varNumStp = varHrz * objSpec.substeps

    _, tplSt = _heun_run(objFld, objZ0, varNumStp, varStp, objPath)
    objY, objYh, objMu, objSig = tplSt
    for idxStp in reversed(range(varNumStp)):
        objY, objYh, objMu, objSig = _heun_reverse(
            objFld, objY, objYh, objMu, objSig, objPathBwd.increment(idxStp),
            varStp)
    return objY
# *****************************************************************************


def anticipate_latent(objZ0, varHrz, dicPrm, objSpec, strModel, varSeed=0):
    """
    Evolve last observed relationship representations into the future.

    Parameters
    ----------
    objZ0 : Tensor
        Initial conditions, one row per relationship, shape [N, d].
    varHrz : int
        Number of future frames.
    dicPrm : dict
        Model parameters (`ode_f.*` or `sde_mu.*` / `sde_sigma.*`).
    objSpec : SolverSpec
        Solver and step size.
    strModel : str
        'scenesayer_ode' or 'scenesayer_sde'.
    varSeed : int
        Brownian seed (SDE only).

    Returns
    -------
    lstZ : list of Tensor
        Shape [N, d] per future frame; rows evolve independently.
    """
    if strModel == 'scenesayer_ode':
        return ode_solve(VectorField(dicPrm, 'ode_f'), objZ0, varHrz, objSpec)
    if strModel == 'scenesayer_sde':
        objFld = SdeField(drift=VectorField(dicPrm, 'sde_mu'),
                          diffusion=VectorField(dicPrm, 'sde_sigma'))
        objPath = BrownianPath(varSeed, objSpec.h, objZ0.shape)
        return sde_solve(objFld, objZ0, varHrz, objSpec, objPath)
    raise ConfigError('Model ' + str(strModel) + ' has no latent dynamics.')
