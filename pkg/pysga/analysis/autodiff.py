# -*- coding: utf-8 -*-
"""Reverse-mode automatic differentiation over dense numpy arrays.

Every parameterised computation of the package (linear maps, attention,
vector fields, losses, unrolled solver steps) is built from the operations in
this module. Operations are recorded on an append-only tape; `backward`
replays the tape in reverse order.
"""

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

import threading
import contextlib
import numpy as np

from pysga.analysis.utilities import ShapeError, ContractError


# Storage precision. 64 bit is only used as reference mode for gradient checks.
_lstDtype = [np.float32]

# Current tape is thread-local, so that several tapes can run in parallel.
_objLocal = threading.local()


def get_precision():
    """Return the floating point type used for tensor storage."""
    return _lstDtype[0]


def set_precision(dtpFlt):
    """
    Set the floating point type used for tensor storage.

    Parameters
    ----------
    dtpFlt : numpy dtype
        Either `np.float32` (default) or `np.float64` (reference mode).
    """
    assert dtpFlt in (np.float32, np.float64), 'Unsupported precision.'
    _lstDtype[0] = dtpFlt


@contextlib.contextmanager
def precision(dtpFlt):
    """Context manager that temporarily switches the storage precision."""
    dtpOld = get_precision()
    set_precision(dtpFlt)
    try:
        yield
    finally:
        set_precision(dtpOld)


# *****************************************************************************
# *** Tape

class TapeNode(object):
    """One recorded operation: inputs, output and local gradient rule."""

    __slots__ = ('strKind', 'lstIn', 'objOut', 'funcBwd')

    def __init__(self, strKind, lstIn, objOut, funcBwd):
        self.strKind = strKind
        self.lstIn = lstIn
        self.objOut = objOut
        self.funcBwd = funcBwd


class Tape(object):
    """
    Append-only record of operations.

    Nodes are appended in execution order, hence every node's inputs precede
    it (topological order). The tape can only be reused after `reset`.
    """

    def __init__(self):
        self.nodes = []
        self.lgcRec = True
        self.lgcUsed = False

    def record(self, strKind, lstIn, objOut, funcBwd):
        """Append a node and link it to its output tensor."""
        if self.lgcUsed:
            raise ContractError('Tape was consumed by backward; call reset '
                                + 'before recording new operations.')
        objNode = TapeNode(strKind, lstIn, objOut, funcBwd)
        self.nodes.append(objNode)
        objOut.node = objNode

    def reset(self):
        """Drop all recorded nodes."""
        for objNode in self.nodes:
            objNode.objOut.node = None
        self.nodes = []
        self.lgcUsed = False

    def __len__(self):
        return len(self.nodes)


def get_tape():
    """Return the tape of the current thread (created on first use)."""
    objTape = getattr(_objLocal, 'objTape', None)
    if objTape is None:
        objTape = Tape()
        _objLocal.objTape = objTape
    return objTape


@contextlib.contextmanager
def use_tape(objTape):
    """Context manager that records onto `objTape` in the current thread."""
    objOld = getattr(_objLocal, 'objTape', None)
    _objLocal.objTape = objTape
    try:
        yield objTape
    finally:
        _objLocal.objTape = objOld


@contextlib.contextmanager
def no_grad():
    """Context manager that disables recording (evaluation mode)."""
    objTape = get_tape()
    lgcOld = objTape.lgcRec
    objTape.lgcRec = False
    try:
        yield
    finally:
        objTape.lgcRec = lgcOld
# *****************************************************************************


# *****************************************************************************
# *** Tensor

class Tensor(object):
    """
    Dense array with gradient slot and tape-node reference.

    Parameters
    ----------
    aryData : array_like
        Values, stored at the current precision.
    requires_grad : bool
        Whether gradients with respect to this tensor are needed.
    name : str or None
        Parameter name (used by the optimiser and checkpoints).
    """

    __array_priority__ = 100

    def __init__(self, aryData, requires_grad=False, name=None):
        self.data = np.asarray(aryData, dtype=get_precision())
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.node = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        """Return a copy of the values."""
        return np.array(self.data)

    def zero_grad(self):
        """Set the gradient to zeros of matching shape."""
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return ('Tensor(shape=' + str(self.shape) + ', name='
                + str(self.name) + ')')

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, objIdx):
        return index(self, objIdx)


def as_tensor(objIn):
    """Wrap constants (scalars, arrays) into a tensor without gradient."""
    if isinstance(objIn, Tensor):
        return objIn
    return Tensor(objIn, requires_grad=False)


def parameter(aryData, name):
    """Create a named tensor that requires gradients."""
    return Tensor(aryData, requires_grad=True, name=name)


def _record(strKind, lstIn, aryOut, funcBwd):
    """Wrap an op result and record it if any input requires gradients."""
    objTape = get_tape()
    lgcGrad = objTape.lgcRec and any(objIn.requires_grad for objIn in lstIn)
    objOut = Tensor(aryOut, requires_grad=lgcGrad)
    if lgcGrad:
        objTape.record(strKind, lstIn, objOut, funcBwd)
    return objOut


def _unbroadcast(aryGrd, tplShp):
    """Sum a broadcast gradient back down to the operand shape."""
    while aryGrd.ndim > len(tplShp):
        aryGrd = aryGrd.sum(axis=0)
    for idxAx, varSze in enumerate(tplShp):
        if varSze == 1 and aryGrd.shape[idxAx] != 1:
            aryGrd = aryGrd.sum(axis=idxAx, keepdims=True)
    return aryGrd


def _broadcast_shape(strKind, objA, objB):
    """Broadcast two shapes or raise a shape error naming the op."""
    try:
        return np.broadcast_shapes(objA.shape, objB.shape)
    except ValueError:
        raise ShapeError(strKind + ': cannot broadcast shapes '
                         + str(objA.shape) + ' and ' + str(objB.shape))
# *****************************************************************************


# *****************************************************************************
# *** Elementwise and linear operations

def add(objA, objB):
    """Elementwise sum with numpy broadcasting."""
    objA, objB = as_tensor(objA), as_tensor(objB)
    _broadcast_shape('add', objA, objB)

    def funcBwd(aryG):
        return [_unbroadcast(aryG, objA.shape), _unbroadcast(aryG, objB.shape)]

    return _record('add', [objA, objB], objA.data + objB.data, funcBwd)


def sub(objA, objB):
    """Elementwise difference with numpy broadcasting."""
    objA, objB = as_tensor(objA), as_tensor(objB)
    _broadcast_shape('sub', objA, objB)

    def funcBwd(aryG):
        return [_unbroadcast(aryG, objA.shape),
                _unbroadcast(-aryG, objB.shape)]

    return _record('sub', [objA, objB], objA.data - objB.data, funcBwd)


def mul(objA, objB):
    """Elementwise product with numpy broadcasting."""
    objA, objB = as_tensor(objA), as_tensor(objB)
    _broadcast_shape('mul', objA, objB)

    def funcBwd(aryG):
        return [_unbroadcast(aryG * objB.data, objA.shape),
                _unbroadcast(aryG * objA.data, objB.shape)]

    return _record('mul', [objA, objB], objA.data * objB.data, funcBwd)


def scale(objA, varC):
    """Multiply by a python constant."""
    objA = as_tensor(objA)
    varC = float(varC)

    def funcBwd(aryG):
        return [aryG * varC]

    return _record('scale', [objA], objA.data * varC, funcBwd)


def matmul(objA, objB):
    """
    Matrix product over the last two axes, batch axes broadcast.

    Both operands need at least two dimensions.
    """
    objA, objB = as_tensor(objA), as_tensor(objB)
    if objA.ndim < 2 or objB.ndim < 2:
        raise ShapeError('matmul: operands need >= 2 dims, got '
                         + str(objA.shape) + ' and ' + str(objB.shape))
    if objA.shape[-1] != objB.shape[-2]:
        raise ShapeError('matmul: inner dims do not match, '
                         + str(objA.shape) + ' @ ' + str(objB.shape)
                         + ' (' + str(objA.shape[-1]) + ' != '
                         + str(objB.shape[-2]) + ')')
    try:
        np.broadcast_shapes(objA.shape[:-2], objB.shape[:-2])
    except ValueError:
        raise ShapeError('matmul: batch dims do not broadcast, '
                         + str(objA.shape) + ' @ ' + str(objB.shape))

    def funcBwd(aryG):
        aryGa = np.matmul(aryG, np.swapaxes(objB.data, -1, -2))
        aryGb = np.matmul(np.swapaxes(objA.data, -1, -2), aryG)
        return [_unbroadcast(aryGa, objA.shape),
                _unbroadcast(aryGb, objB.shape)]

    return _record('matmul', [objA, objB], np.matmul(objA.data, objB.data),
                   funcBwd)


def concat(lstIn, axis=-1):
    """Concatenate tensors along an axis."""
    lstIn = [as_tensor(objIn) for objIn in lstIn]
    if len(lstIn) == 0:
        raise ShapeError('concat: no inputs')
    varNdim = lstIn[0].ndim
    varAx = axis % varNdim
    for objIn in lstIn:
        tplA = lstIn[0].shape[:varAx] + lstIn[0].shape[varAx + 1:]
        tplB = objIn.shape[:varAx] + objIn.shape[varAx + 1:]
        if objIn.ndim != varNdim or tplA != tplB:
            raise ShapeError('concat: shapes ' + str(lstIn[0].shape) + ' and '
                             + str(objIn.shape) + ' differ off axis '
                             + str(varAx))
    vecSplt = np.cumsum([objIn.shape[varAx] for objIn in lstIn])[:-1]

    def funcBwd(aryG):
        return np.split(aryG, vecSplt, axis=varAx)

    return _record('concat', lstIn,
                   np.concatenate([objIn.data for objIn in lstIn],
                                  axis=varAx), funcBwd)


def split(objA, lstSze, axis=-1):
    """
    Split a tensor into consecutive pieces along an axis.

    Parameters
    ----------
    objA : Tensor
        Input.
    lstSze : list of int
        Sizes of the pieces; must add up to the axis length.
    axis : int
        Axis to split.

    Returns
    -------
    lstOut : list of Tensor
    """
    objA = as_tensor(objA)
    varAx = axis % objA.ndim
    if int(np.sum(lstSze)) != objA.shape[varAx]:
        raise ShapeError('split: sizes ' + str(list(lstSze))
                         + ' do not add up to axis length '
                         + str(objA.shape[varAx]))
    lstOut = []
    varStr = 0
    for varSze in lstSze:
        lstIdx = [slice(None)] * objA.ndim
        lstIdx[varAx] = slice(varStr, varStr + varSze)
        lstOut.append(index(objA, tuple(lstIdx)))
        varStr += varSze
    return lstOut


def index(objA, objIdx):
    """Numpy indexing (basic or integer-array); gradients are scattered."""
    objA = as_tensor(objA)

    def funcBwd(aryG):
        aryGa = np.zeros_like(objA.data)
        np.add.at(aryGa, objIdx, aryG)
        return [aryGa]

    try:
        aryOut = objA.data[objIdx]
    except IndexError as objErr:
        raise ShapeError('index: ' + str(objErr) + ' for shape '
                         + str(objA.shape))
    return _record('index', [objA], aryOut, funcBwd)


def take(objA, aryIdx):
    """Gather rows (first axis) of a tensor, e.g. embedding lookup."""
    aryIdx = np.asarray(aryIdx, dtype=np.int64)
    return index(objA, aryIdx)


def stack(lstIn, axis=0):
    """Stack tensors of equal shape along a new axis."""
    lstIn = [as_tensor(objIn) for objIn in lstIn]
    for objIn in lstIn:
        if objIn.shape != lstIn[0].shape:
            raise ShapeError('stack: shapes ' + str(lstIn[0].shape) + ' and '
                             + str(objIn.shape) + ' differ')
    varAx = axis % (lstIn[0].ndim + 1)

    def funcBwd(aryG):
        return [np.take(aryG, idx, axis=varAx) for idx in range(len(lstIn))]

    return _record('stack', lstIn,
                   np.stack([objIn.data for objIn in lstIn], axis=varAx),
                   funcBwd)


def reshape(objA, tplShp):
    """Reshape (same number of elements)."""
    objA = as_tensor(objA)
    try:
        aryOut = objA.data.reshape(tplShp)
    except ValueError:
        raise ShapeError('reshape: cannot reshape ' + str(objA.shape)
                         + ' into ' + str(tplShp))

    def funcBwd(aryG):
        return [aryG.reshape(objA.shape)]

    return _record('reshape', [objA], aryOut, funcBwd)


def transpose(objA, tplAxs=None):
    """Permute axes (default: swap the last two)."""
    objA = as_tensor(objA)
    if tplAxs is None:
        tplAxs = list(range(objA.ndim))
        tplAxs[-1], tplAxs[-2] = tplAxs[-2], tplAxs[-1]
    tplAxs = tuple(tplAxs)
    tplInv = tuple(np.argsort(tplAxs))

    def funcBwd(aryG):
        return [np.transpose(aryG, tplInv)]

    return _record('transpose', [objA], np.transpose(objA.data, tplAxs),
                   funcBwd)
# *****************************************************************************


# *****************************************************************************
# *** Nonlinearities

def relu(objA):
    """Rectified linear unit."""
    objA = as_tensor(objA)
    aryMsk = objA.data > 0

    def funcBwd(aryG):
        return [aryG * aryMsk]

    return _record('relu', [objA], objA.data * aryMsk, funcBwd)


def tanh(objA):
    """Hyperbolic tangent."""
    objA = as_tensor(objA)
    aryOut = np.tanh(objA.data)

    def funcBwd(aryG):
        return [aryG * (1.0 - aryOut * aryOut)]

    return _record('tanh', [objA], aryOut, funcBwd)


def exp(objA):
    """Elementwise exponential."""
    objA = as_tensor(objA)
    aryOut = np.exp(objA.data)

    def funcBwd(aryG):
        return [aryG * aryOut]

    return _record('exp', [objA], aryOut, funcBwd)


def log(objA, varMin=0.0):
    """
    Elementwise natural logarithm, optionally clamped from below.

    Entries below `varMin` are replaced by `varMin`; their gradient is zero.
    """
    objA = as_tensor(objA)
    aryIn = objA.data
    if varMin > 0.0:
        aryLgcOk = aryIn > varMin
        aryIn = np.where(aryLgcOk, aryIn, varMin)
    else:
        aryLgcOk = np.ones(aryIn.shape, dtype=bool)

    def funcBwd(aryG):
        return [np.where(aryLgcOk, aryG / aryIn, 0.0)]

    return _record('log', [objA], np.log(aryIn), funcBwd)


def softmax(objA, axis=-1):
    """Softmax along an axis (max-shifted)."""
    objA = as_tensor(objA)
    aryShf = objA.data - np.max(objA.data, axis=axis, keepdims=True)
    aryExp = np.exp(aryShf)
    aryOut = aryExp / np.sum(aryExp, axis=axis, keepdims=True)

    def funcBwd(aryG):
        aryDot = np.sum(aryG * aryOut, axis=axis, keepdims=True)
        return [aryOut * (aryG - aryDot)]

    return _record('softmax', [objA], aryOut, funcBwd)


def smooth_l1(objA, varBeta=1.0):
    """
    Elementwise smooth-L1 (Huber) penalty.

    0.5 x^2 / beta for |x| < beta, |x| - 0.5 beta otherwise.
    """
    objA = as_tensor(objA)
    aryAbs = np.abs(objA.data)
    aryLgcQd = aryAbs < varBeta
    aryOut = np.where(aryLgcQd, 0.5 * objA.data * objA.data / varBeta,
                      aryAbs - 0.5 * varBeta)

    def funcBwd(aryG):
        return [aryG * np.where(aryLgcQd, objA.data / varBeta,
                                np.sign(objA.data))]

    return _record('smooth_l1', [objA], aryOut, funcBwd)
# *****************************************************************************


# *****************************************************************************
# *** Reductions

def reduce_sum(objA, axis=None, keepdims=False):
    """Sum over an axis (or all axes)."""
    objA = as_tensor(objA)
    aryOut = np.sum(objA.data, axis=axis, keepdims=keepdims)

    def funcBwd(aryG):
        if axis is not None and not keepdims:
            aryG = np.expand_dims(aryG, axis)
        return [np.broadcast_to(aryG, objA.shape).copy()]

    return _record('reduce_sum', [objA], aryOut, funcBwd)


def reduce_mean(objA, axis=None, keepdims=False):
    """Mean over an axis (or all axes)."""
    objA = as_tensor(objA)
    if axis is None:
        varNum = objA.data.size
    else:
        varNum = int(np.prod([objA.shape[varAx] for varAx in
                              np.atleast_1d(axis)]))
    return scale(reduce_sum(objA, axis=axis, keepdims=keepdims),
                 1.0 / max(varNum, 1))
# *****************************************************************************


# Dispatch table for `forward_op`:
dicOps = {'matmul': matmul,
          'add': add,
          'sub': sub,
          'mul': mul,
          'concat': lambda *lstIn, **dicKw: concat(list(lstIn), **dicKw),
          'split': split,
          'stack': lambda *lstIn, **dicKw: stack(list(lstIn), **dicKw),
          'relu': relu,
          'tanh': tanh,
          'exp': exp,
          'log': log,
          'softmax': softmax,
          'smooth_l1': smooth_l1,
          'scale': scale,
          'reduce_sum': reduce_sum,
          'reduce_mean': reduce_mean,
          'reshape': reshape,
          'transpose': transpose,
          'take': take}


def forward_op(strKind, *lstIn, **dicKw):
    """
    Apply an operation by name and record it on the current tape.

    Parameters
    ----------
    strKind : str
        Operation name, a key of `dicOps` (e.g. 'matmul', 'softmax').
    *lstIn
        Operands (tensors or constants) and positional arguments.
    **dicKw
        Keyword arguments of the operation (e.g. `axis`).

    Returns
    -------
    objOut : Tensor or list of Tensor
    """
    if strKind not in dicOps:
        raise ContractError('Unknown operation: ' + str(strKind))
    return dicOps[strKind](*lstIn, **dicKw)


# *****************************************************************************
# *** Backpropagation

def backward(objLoss, objTape=None):
    """
    Backpropagate from a scalar loss.

    Parameters
    ----------
    objLoss : Tensor
        Scalar produced on the tape.
    objTape : Tape or None
        Tape to replay (default: tape of the current thread).

    Notes
    -----
    Gradients are accumulated into `grad` of every tensor reachable from the
    loss that requires gradients. The tape is marked as consumed and has to be
    reset before new operations are recorded on it.
    """
    if objTape is None:
        objTape = get_tape()
    if objLoss.data.size != 1:
        raise ContractError('backward needs a scalar loss, got shape '
                            + str(objLoss.shape))
    if not objLoss.requires_grad:
        objTape.lgcUsed = True
        return

    dicGrd = {id(objLoss): np.ones_like(objLoss.data)}
    dicTns = {id(objLoss): objLoss}

    for objNode in reversed(objTape.nodes):
        aryG = dicGrd.get(id(objNode.objOut))
        if aryG is None:
            continue
        lstGrd = objNode.funcBwd(aryG)
        for objIn, aryGin in zip(objNode.lstIn, lstGrd):
            if (aryGin is None) or (not objIn.requires_grad):
                continue
            varKey = id(objIn)
            if varKey in dicGrd:
                dicGrd[varKey] = dicGrd[varKey] + aryGin
            else:
                dicGrd[varKey] = aryGin
                dicTns[varKey] = objIn

    for varKey, objTns in dicTns.items():
        aryGin = np.asarray(dicGrd[varKey], dtype=objTns.data.dtype)
        if objTns.grad is None:
            objTns.grad = aryGin.reshape(objTns.shape).copy()
        else:
            objTns.grad = objTns.grad + aryGin.reshape(objTns.shape)

    objTape.lgcUsed = True


def numerical_gradient(funcLoss, objPrm, varStp=1e-3):
    """
    Central finite-difference gradient of a scalar function.

    Parameters
    ----------
    funcLoss : callable
        Function without arguments returning a scalar tensor; it must read
        the current values of `objPrm`.
    objPrm : Tensor
        Tensor whose entries are perturbed in place.
    varStp : float
        Finite-difference step.

    Returns
    -------
    aryGrd : np.array
        Gradient estimate (64 bit), same shape as `objPrm`.
    """
    aryGrd = np.zeros(objPrm.shape, dtype=np.float64)
    with no_grad():
        for tplIdx in np.ndindex(*objPrm.shape):
            varOld = objPrm.data[tplIdx]
            objPrm.data[tplIdx] = varOld + varStp
            varPos = float(funcLoss().data)
            objPrm.data[tplIdx] = varOld - varStp
            varNeg = float(funcLoss().data)
            objPrm.data[tplIdx] = varOld
            aryGrd[tplIdx] = (varPos - varNeg) / (2.0 * varStp)
    return aryGrd
# *****************************************************************************


# *****************************************************************************
# *** Optimiser

class AdamState(object):
    """First and second moment estimates of Adam, keyed by parameter name."""

    def __init__(self):
        self.dicM = {}
        self.dicV = {}
        self.varStep = 0


def zero_grad(lstPrm):
    """Reset the gradients of all parameters to zero."""
    for objPrm in lstPrm:
        objPrm.zero_grad()


def adam_step(lstPrm, objState, varLr=1e-4, tplBetas=(0.9, 0.999),
              varEps=1e-8):
    """
    Apply one Adam update and zero the gradients.

    Parameters
    ----------
    lstPrm : list of Tensor
        Named parameters with populated gradients.
    objState : AdamState
        Optimiser moments (updated in place).
    varLr : float
        Learning rate.
    tplBetas : tuple of float
        Exponential decay rates of the moment estimates.
    varEps : float
        Denominator offset.
    """
    for objPrm in lstPrm:
        if objPrm.grad is None:
            raise ContractError('adam_step: parameter ' + str(objPrm.name)
                                + ' has no gradient')
    varB1, varB2 = tplBetas
    objState.varStep += 1
    varCor1 = 1.0 - varB1 ** objState.varStep
    varCor2 = 1.0 - varB2 ** objState.varStep

    for objPrm in lstPrm:
        strKey = objPrm.name
        aryM = objState.dicM.get(strKey)
        if aryM is None:
            aryM = np.zeros_like(objPrm.data)
            objState.dicV[strKey] = np.zeros_like(objPrm.data)
        aryV = objState.dicV[strKey]
        if aryM.shape != objPrm.shape:
            raise ContractError('adam_step: moment shape ' + str(aryM.shape)
                                + ' does not match parameter '
                                + str(strKey) + ' ' + str(objPrm.shape))
        aryG = objPrm.grad
        aryM = varB1 * aryM + (1.0 - varB1) * aryG
        aryV = varB2 * aryV + (1.0 - varB2) * aryG * aryG
        objState.dicM[strKey] = aryM.astype(objPrm.data.dtype)
        objState.dicV[strKey] = aryV.astype(objPrm.data.dtype)
        aryUpd = varLr * (aryM / varCor1) / (np.sqrt(aryV / varCor2) + varEps)
        objPrm.data -= aryUpd.astype(objPrm.data.dtype)
        objPrm.zero_grad()
# *****************************************************************************
