# -*- coding: utf-8 -*-
"""Decoder heads and training objective."""

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
from scipy.special import softmax

from pysga.analysis import autodiff as ad
from pysga.analysis.encoders import init_linear, linear
from pysga.analysis.scene_graph import PredicateDistribution
from pysga.analysis.utilities import ContractError, ConfigError


# Lower bound of probabilities inside the logarithm of the cross-entropy:
varMinPrb = 1e-12

# Tolerance of the probability sum check (float32 storage):
varTolPrb = 1e-5

# Number of clamped target probabilities, accumulated over the process:
dicWarnCnt = {'object_ce_clamp': 0}

# Minimum number of observed frames of an anticipation window:
varMinObs = 3


# *****************************************************************************
# *** Loss weights

@dataclass(frozen=True)
class LossWeights:
    """Weights of generation, object, anticipation, box and recon terms."""

    gen: float = 1.0
    obj: float = 1.0
    ant: float = 2.0
    boxes: float = 2.0
    recon: float = 2.0

    def __post_init__(self):
        for varLmb in self.as_list():
            if not (np.isfinite(varLmb) and varLmb >= 0.0):
                raise ConfigError('Loss weights must be finite and '
                                  + 'nonnegative, got ' + str(self.as_list()))

    @classmethod
    def from_list(cls, lstLmb):
        if len(lstLmb) != 5:
            raise ConfigError('Five loss weights needed, got '
                              + str(len(lstLmb)))
        return cls(*[float(varLmb) for varLmb in lstLmb])

    def as_list(self):
        return [self.gen, self.obj, self.ant, self.boxes, self.recon]


# Default weights per model (gen, object, ant, boxes, recon):
dicDefLmb = {'scenesayer_ode': [1.0, 1.0, 2.0, 2.0, 2.0],
             'scenesayer_sde': [1.0, 1.0, 2.0, 2.0, 2.0],
             'baseline_plus': [0.0, 1.0, 2.0, 0.0, 2.0],
             'baseline_plus_plus': [1.0, 1.0, 2.0, 0.0, 2.0]}

# Loss terms that can be switched off for ablations, with their slot:
dicAblate = {'gen': 0, 'object': 1, 'ant': 2, 'boxes': 3, 'recon': 4}
# *****************************************************************************


# *****************************************************************************
# *** Heads

def init_head(dicPrm, strName, varIn, varHid, varOut, objRng):
    """Add a two-layer MLP head `strName.l1`, `strName.l2`."""
    init_linear(dicPrm, strName + '.l1', varIn, varHid, objRng)
    init_linear(dicPrm, strName + '.l2', varHid, varOut, objRng)


def init_heads(dicPrm, varDimRel, varDimObj, varDimHid, varNumCls, varNumPrd,
               objRng):
    """Add generation, anticipation, box and object classification heads."""
    init_head(dicPrm, 'head_gen', varDimRel, varDimHid, varNumPrd, objRng)
    init_head(dicPrm, 'head_ant', varDimRel, varDimHid, varNumPrd, objRng)
    init_head(dicPrm, 'head_box_sub', varDimRel, varDimHid, 4, objRng)
    init_head(dicPrm, 'head_box_obj', varDimRel, varDimHid, 4, objRng)
    init_head(dicPrm, 'head_obj', varDimObj, varDimHid, varNumCls, objRng)


def mlp_head(objX, dicPrm, strName):
    """Two-layer MLP with relu hidden layer."""
    return linear(ad.relu(linear(objX, dicPrm, strName + '.l1')), dicPrm,
                  strName + '.l2')


def decode_distributions(aryScr, vecLgcPair, lgcLgt=True):
    """
    Predicate distributions of the present pairs of one frame.

    Parameters
    ----------
    aryScr : np.array
        Head outputs, shape [P, |P|].
    vecLgcPair : np.array
        Pairs to decode, shape [P] (bool).
    lgcLgt : bool
        Whether `aryScr` holds logits (softmax applied) or probabilities.

    Returns
    -------
    lstDst : list of PredicateDistribution
        Normalised scores. Pair (0, j) relates the actor (object 0) to the
        j-th decoded pair, so objects are numbered [actor] + present tracks in
        track order.
    """
    aryPrb = np.asarray(aryScr, dtype=np.float64)
    if lgcLgt:
        aryPrb = softmax(aryPrb, axis=-1)
    lstDst = []
    for idxPair in np.flatnonzero(vecLgcPair):
        lstDst.append(PredicateDistribution(
            pair=(0, len(lstDst) + 1),
            scores=tuple(float(varPrb) for varPrb in aryPrb[idxPair])))
    return lstDst
# *****************************************************************************


# *****************************************************************************
# *** Loss terms

def predicate_margin_loss(objScr, aryPos, vecWgt=None):
    """
    Multi-label margin loss on predicate scores.

    Parameters
    ----------
    objScr : Tensor
        Logits, shape [|P|] or [M, |P|].
    aryPos : array_like
        Positive predicates: multi-hot of the same shape as `objScr`, or a
        collection of ids if `objScr` is one-dimensional.
    vecWgt : np.array or None
        Weight of each row, shape [M].

    Returns
    -------
    objLoss : Tensor
        Sum over rows of w * sum_{u pos, v neg} max(0, 1 - s[u] + s[v]).
    """
    objScr = ad.as_tensor(objScr)
    if objScr.ndim == 1:
        varNumPrd = objScr.shape[0]
        aryPos = np.asarray(aryPos)
        if aryPos.dtype != bool or aryPos.shape != (varNumPrd,):
            vecIdx = np.asarray(list(aryPos), dtype=np.int64)
            if np.any(vecIdx < 0) or np.any(vecIdx >= varNumPrd):
                raise ContractError('Positive predicate out of range.')
            aryPos = np.zeros(varNumPrd, dtype=bool)
            aryPos[vecIdx] = True
        objScr = ad.reshape(objScr, (1, varNumPrd))
        aryPos = aryPos[None, :]
    aryPos = np.asarray(aryPos, dtype=bool)
    varNumRow, varNumPrd = objScr.shape
    if aryPos.shape != (varNumRow, varNumPrd):
        raise ContractError('Positives shape ' + str(aryPos.shape)
                            + ' does not match scores ' + str(objScr.shape))
    if not np.all(np.any(aryPos, axis=1)):
        raise ContractError('Margin loss needs at least one positive '
                            + 'predicate per row.')
    if vecWgt is None:
        vecWgt = np.ones(varNumRow)

    # Entry [m, u, v] is 1 - s[m, u] + s[m, v]:
    objDif = ad.add(ad.sub(1.0, ad.reshape(objScr, (varNumRow, varNumPrd, 1))),
                    ad.reshape(objScr, (varNumRow, 1, varNumPrd)))
    aryMsk = (aryPos[:, :, None] & ~aryPos[:, None, :]).astype(np.float64)
    aryMsk = aryMsk * np.asarray(vecWgt, dtype=np.float64)[:, None, None]
    return ad.reduce_sum(ad.mul(ad.relu(objDif), aryMsk))


def object_ce_loss(objPrb, vecTgt):
    """
    Cross-entropy of object class probabilities.

    Parameters
    ----------
    objPrb : Tensor
        Probabilities, shape [N, |C|] (rows sum to one).
    vecTgt : np.array
        Target categories, shape [N].

    Returns
    -------
    objLoss : Tensor
        -sum_n log p[n, target_n]. Probabilities below 1e-12 are clamped and
        counted in `dicWarnCnt['object_ce_clamp']`.
    """
    objPrb = ad.as_tensor(objPrb)
    vecTgt = np.asarray(vecTgt, dtype=np.int64)
    vecSum = np.sum(objPrb.data, axis=-1, dtype=np.float64)
    if not np.allclose(vecSum, 1.0, rtol=0.0, atol=varTolPrb):
        raise ContractError('Object class probabilities do not sum to one.')
    vecIdx = np.arange(vecTgt.shape[0])
    varNumClp = int(np.sum(objPrb.data[vecIdx, vecTgt] < varMinPrb))
    if varNumClp > 0:
        dicWarnCnt['object_ce_clamp'] += varNumClp
    objLog = ad.log(ad.index(objPrb, (vecIdx, vecTgt)), varMin=varMinPrb)
    return ad.scale(ad.reduce_sum(objLog), -1.0)


def bbox_regression_loss(objPred, aryGt, vecWgt=None):
    """
    Sum of elementwise smooth-L1 (beta 1) between boxes [N, 4].

    `vecWgt` optionally weights each box (row).
    """
    objPred = ad.as_tensor(objPred)
    if tuple(np.shape(aryGt)) != objPred.shape:
        raise ContractError('Box shapes differ: ' + str(objPred.shape)
                            + ' and ' + str(np.shape(aryGt)))
    objDst = ad.smooth_l1(ad.sub(objPred, aryGt))
    if vecWgt is not None:
        objDst = ad.mul(objDst, np.asarray(vecWgt, dtype=np.float64)[:, None])
    return ad.reduce_sum(objDst)


def reconstruction_loss(objZ, objZhat, vecNumObj, vecWgt=None):
    """
    Smooth-L1 distance of anticipated and encoded representations.

    Parameters
    ----------
    objZ : Tensor
        Anticipated representations, shape [N, d].
    objZhat : Tensor
        Temporal encoder representations of the same pairs, shape [N, d].
    vecNumObj : array_like
        Number of objects N(t) in the frame of each row (scalar or [N]).
    vecWgt : np.array or None
        Weight of each row.

    Returns
    -------
    objLoss : Tensor
        sum_rows w * sum_d smooth_l1(z - z_hat) / N(t)^2.
    """
    objZ = ad.as_tensor(objZ)
    objZhat = ad.as_tensor(objZhat)
    if objZ.shape != objZhat.shape:
        raise ContractError('Reconstruction needs matching pair sets, got '
                            + str(objZ.shape) + ' and '
                            + str(objZhat.shape))
    vecNorm = 1.0 / np.square(np.asarray(vecNumObj, dtype=np.float64))
    vecNorm = np.broadcast_to(vecNorm, objZ.shape[:1])
    if vecWgt is not None:
        vecNorm = vecNorm * vecWgt
    objRow = ad.reduce_sum(ad.smooth_l1(ad.sub(objZ, objZhat)), axis=-1)
    return ad.reduce_sum(ad.mul(objRow, vecNorm))


def total_loss(dicObs, lstAnt, objLmb):
    """
    Weighted sum of observed and anticipated loss terms.

    Parameters
    ----------
    dicObs : dict
        'gen' and 'object' terms over the observed frames (Tensor, float, or
        None for absent terms).
    lstAnt : list of dict
        One dict per anticipation window with 'ant', 'boxes', 'recon'.
    objLmb : LossWeights or list
        Weights (gen, object, ant, boxes, recon).

    Returns
    -------
    objLoss : Tensor
    """
    if not isinstance(objLmb, LossWeights):
        objLmb = LossWeights.from_list(objLmb)
    lstTrm = [(dicObs.get('gen'), objLmb.gen),
              (dicObs.get('object'), objLmb.obj)]
    for dicAnt in lstAnt:
        lstTrm += [(dicAnt.get('ant'), objLmb.ant),
                   (dicAnt.get('boxes'), objLmb.boxes),
                   (dicAnt.get('recon'), objLmb.recon)]
    objLoss = ad.as_tensor(0.0)
    for objTrm, varLmb in lstTrm:
        if objTrm is None or varLmb == 0.0:
            continue
        objLoss = ad.add(objLoss, ad.scale(objTrm, varLmb))
    return objLoss
# *****************************************************************************


# *****************************************************************************
# *** Loss assembly over a video

def window_starts(varNumFrm, varHrz):
    """Observed lengths T = 3 .. N - H of the anticipation windows."""
    return list(range(varMinObs, varNumFrm - varHrz + 1))


def window_multiplicity(varNumFrm, varHrz):
    """
    Number of (window, horizon step) pairs that target each frame.

    Returns
    -------
    vecMlt : np.array
        Shape [N]; entry t counts windows T and steps h with T - 1 + h = t.
    """
    vecMlt = np.zeros(varNumFrm, dtype=np.int64)
    for varObs in window_starts(varNumFrm, varHrz):
        vecMlt[varObs:varObs + varHrz] += 1
    return vecMlt


def window_rows(objVt, lstObs):
    """
    Rows (window, pair) of the initial conditions of all windows.

    Returns
    -------
    vecRowObs : np.array
        Observed length T of each row's window.
    vecRowPair : np.array
        Pair index of each row (pairs present at frame T - 1).
    """
    lstRowObs = []
    lstRowPair = []
    for varObs in lstObs:
        vecPair = np.flatnonzero(objVt.aryPrsPair[varObs - 1])
        lstRowObs.append(np.full(vecPair.shape, varObs, dtype=np.int64))
        lstRowPair.append(vecPair)
    if len(lstRowObs) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(lstRowObs), np.concatenate(lstRowPair)


def observed_terms(objVt, dicEnc, dicPrm, objLmb, lgcGen=True):
    """
    Object classification and generation terms over all frames.

    Returns
    -------
    dicObs : dict
        'object' and 'gen' tensors (None where not applicable).
    """
    dicObs = {'object': None, 'gen': None}
    if objLmb.obj > 0.0:
        aryFrm, aryTrk = np.nonzero(objVt.aryPrsObj)
        objLgt = mlp_head(ad.index(dicEnc['obj'], (aryFrm, aryTrk)), dicPrm,
                          'head_obj')
        dicObs['object'] = object_ce_loss(ad.softmax(objLgt, axis=-1),
                                          objVt.vecTrkCat[aryTrk])
    if lgcGen and objLmb.gen > 0.0 and dicEnc['tmp'] is not None:
        aryLgc = objVt.aryPrsPair & np.any(objVt.aryPos, axis=-1)
        aryFrm, aryPair = np.nonzero(aryLgc)
        if aryFrm.size > 0:
            objLgt = mlp_head(ad.index(dicEnc['tmp'], (aryPair, aryFrm)),
                              dicPrm, 'head_gen')
            dicObs['gen'] = predicate_margin_loss(
                objLgt, objVt.aryPos[aryFrm, aryPair])
    return dicObs


def anticipated_terms(lstZant, vecRowObs, vecRowPair, objVt, objTgt, dicPrm,
                      objLmb, lgcBoxActOnly=False, vecRowWgt=None):
    """
    Anticipation, box and reconstruction terms of anticipated rows.

    Parameters
    ----------
    lstZant : list of Tensor
        Anticipated representations per horizon step h = 1, 2, ...; each of
        shape [M, d], one row per (window, pair).
    vecRowObs : np.array
        Observed length T of each row's window, shape [M].
    vecRowPair : np.array
        Pair index of each row, shape [M].
    objVt : VideoTensors
        Ground truth of the video.
    objTgt : Tensor
        Reconstruction targets, shape [P, N, d] (encoder output).
    dicPrm : dict
        Model parameters.
    objLmb : LossWeights
        Terms with zero weight are skipped.
    lgcBoxActOnly : bool
        Supervise the subject (actor) box only.
    vecRowWgt : np.array or None
        Weight of each row.

    Returns
    -------
    dicAnt : dict
        'ant', 'boxes', 'recon' tensors (None where no rows qualify).
    tplAcc : tuple of int
        (correct top-1 anticipations, anticipated rows with labels).
    """
    if vecRowWgt is None:
        vecRowWgt = np.ones(vecRowObs.shape[0])
    dicLst = {'ant': [], 'boxes': [], 'recon': []}
    varNumHit = 0
    varNumAnt = 0
    varNumFrm = objVt.num_frames

    for idxHrz, objZ in enumerate(lstZant):
        vecTgt = vecRowObs - 1 + (idxHrz + 1)
        vecLgc = vecTgt < varNumFrm
        vecLgc[vecLgc] = objVt.aryPrsPair[vecTgt[vecLgc], vecRowPair[vecLgc]]
        vecRow = np.flatnonzero(vecLgc)
        if vecRow.size == 0:
            continue
        vecT = vecTgt[vecRow]
        vecP = vecRowPair[vecRow]
        vecW = vecRowWgt[vecRow]
        objZr = ad.index(objZ, vecRow)

        if objLmb.ant > 0.0:
            aryPos = objVt.aryPos[vecT, vecP]
            vecLab = np.any(aryPos, axis=-1)
            if np.any(vecLab):
                objLgt = mlp_head(ad.index(objZr, np.flatnonzero(vecLab)),
                                  dicPrm, 'head_ant')
                dicLst['ant'].append(predicate_margin_loss(
                    objLgt, aryPos[vecLab], vecWgt=vecW[vecLab]))
                vecTop = np.argmax(objLgt.data, axis=-1)
                varNumHit += int(np.sum(aryPos[vecLab][np.arange(vecTop.size),
                                                       vecTop]))
                varNumAnt += int(vecTop.size)

        if objLmb.boxes > 0.0:
            objBox = bbox_regression_loss(
                mlp_head(objZr, dicPrm, 'head_box_sub'),
                objVt.aryBox[vecT, 0], vecWgt=vecW)
            if not lgcBoxActOnly:
                objBox = ad.add(objBox, bbox_regression_loss(
                    mlp_head(objZr, dicPrm, 'head_box_obj'),
                    objVt.aryBox[vecT, vecP + 1], vecWgt=vecW))
            dicLst['boxes'].append(objBox)

        if objLmb.recon > 0.0:
            dicLst['recon'].append(reconstruction_loss(
                objZr, ad.index(objTgt, (vecP, vecT)), objVt.vecNumObj[vecT],
                vecWgt=vecW))

    dicAnt = {}
    for strKey, lstTrm in dicLst.items():
        dicAnt[strKey] = None
        for objTrm in lstTrm:
            dicAnt[strKey] = (objTrm if dicAnt[strKey] is None
                              else ad.add(dicAnt[strKey], objTrm))
    return dicAnt, (varNumHit, varNumAnt)
# *****************************************************************************
