# -*- coding: utf-8 -*-
"""Synthetic scene graph corpora with known Markov predicate dynamics."""

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

from pysga.analysis.utilities import ConfigError
from pysga.analysis.scene_graph import (ObjectInstance, RelationshipTriplet,
                                        SceneGraph, Taxonomy, VideoAnnotation)


# Names of the transition matrix presets:
lstPresets = ['persistent', 'cyclic', 'uniform', 'mixed']

# Distance between actor centre and object centre (normalised units):
varRad = 0.22

# Standard deviation of the positional jitter of object boxes:
varSdJit = 0.01


@dataclass
class SynthConfig:
    """
    Parameters of the synthetic generator.

    Attributes
    ----------
    varNumCls : int
        Number of object categories (category 0 is the actor).
    varNumPrd : int
        Number of predicate classes.
    varNumVid : int
        Number of videos.
    tplFrmRng : tuple of int
        Inclusive range of frames per video.
    tplPairRng : tuple of int
        Inclusive range of (actor, object) pairs per video.
    aryTrans : np.array
        Predicate transition matrix, shape [|P|, |P|], rows sum to one.
    """

    varNumCls: int
    varNumPrd: int
    varNumVid: int
    tplFrmRng: tuple
    tplPairRng: tuple
    aryTrans: np.ndarray


def transition_matrix(strPreset, varNumPrd):
    """
    Create a predicate transition matrix.

    Parameters
    ----------
    strPreset : str
        'persistent' (identity), 'cyclic' (p -> p+1 mod |P|), 'uniform', or
        'mixed' (first half of the predicates absorbing, second half cycling
        within its own block).
    varNumPrd : int
        Number of predicate classes.

    Returns
    -------
    aryTrans : np.array
        Row-stochastic matrix, shape [|P|, |P|].
    """
    if varNumPrd < 1:
        raise ConfigError('Number of predicates must be positive.')
    if strPreset == 'persistent':
        return np.eye(varNumPrd)
    if strPreset == 'cyclic':
        return np.roll(np.eye(varNumPrd), 1, axis=1)
    if strPreset == 'uniform':
        return np.full((varNumPrd, varNumPrd), 1.0 / varNumPrd)
    if strPreset == 'mixed':
        varHlf = varNumPrd // 2
        aryTrans = np.zeros((varNumPrd, varNumPrd))
        aryTrans[:varHlf, :varHlf] = np.eye(varHlf)
        aryTrans[varHlf:, varHlf:] = np.roll(np.eye(varNumPrd - varHlf), 1,
                                             axis=1)
        return aryTrans
    raise ConfigError('Unknown synthetic preset: ' + str(strPreset)
                      + ' (choose from ' + ', '.join(lstPresets) + ')')


def check_transition_matrix(aryTrans, varNumPrd):
    """Raise a config error unless the matrix is row-stochastic."""
    aryTrans = np.asarray(aryTrans, dtype=np.float64)
    if aryTrans.shape != (varNumPrd, varNumPrd):
        raise ConfigError('Transition matrix must have shape '
                          + str((varNumPrd, varNumPrd)) + ', got '
                          + str(aryTrans.shape))
    if np.any(aryTrans < 0.0) or not np.all(np.isfinite(aryTrans)):
        raise ConfigError('Transition matrix has negative or non-finite '
                          + 'entries.')
    if not np.allclose(np.sum(aryTrans, axis=1), 1.0, atol=1e-8):
        raise ConfigError('Transition matrix rows do not sum to one.')


def _predicate_offsets(varNumPrd):
    """Prototype offset of the object centre relative to the actor."""
    vecAng = 2.0 * np.pi * np.arange(varNumPrd) / varNumPrd
    return varRad * np.stack([np.cos(vecAng), np.sin(vecAng)], axis=1)


def _box(varCx, varCy, varW, varH):
    """Clipped box (x1, y1, x2, y2) rounded to 4 decimals."""
    vecBox = np.array([varCx - 0.5 * varW, varCy - 0.5 * varH,
                       varCx + 0.5 * varW, varCy + 0.5 * varH])
    vecBox = np.around(np.clip(vecBox, 0.0, 1.0), decimals=4)
    return tuple(float(varX) for varX in vecBox)


def generate_synthetic(objCfg, varSeed):
    """
    Generate a synthetic corpus.

    Parameters
    ----------
    objCfg : SynthConfig
        Generator parameters.
    varSeed : int
        Seed; identical seeds give identical corpora.

    Returns
    -------
    lstVid : list of VideoAnnotation
        Generated videos, sorted by video id.

    Notes
    -----
    Every video has one actor (category 0) and a set of objects with unique
    categories. Each (actor, object) pair carries exactly one predicate per
    frame; the predicate sequence is a Markov chain under `objCfg.aryTrans`,
    started from the uniform distribution. The object box is placed at a
    predicate specific offset from the actor box, so predicates can be
    inferred from geometry.
    """
    check_transition_matrix(objCfg.aryTrans, objCfg.varNumPrd)
    varFrmMin, varFrmMax = objCfg.tplFrmRng
    varPairMin, varPairMax = objCfg.tplPairRng
    if varFrmMin < 1 or varFrmMax < varFrmMin:
        raise ConfigError('Invalid frame range: ' + str(objCfg.tplFrmRng))
    if varPairMin < 1 or varPairMax < varPairMin:
        raise ConfigError('Invalid pair range: ' + str(objCfg.tplPairRng))
    if varPairMax > objCfg.varNumCls - 1:
        raise ConfigError('Need at least ' + str(varPairMax + 1)
                          + ' object categories for ' + str(varPairMax)
                          + ' pairs.')

    aryTrans = np.asarray(objCfg.aryTrans, dtype=np.float64)
    aryOff = _predicate_offsets(objCfg.varNumPrd)
    objTax = Taxonomy(
        object_classes=tuple(['person'] + ['object_' + str(idx).zfill(2)
                                           for idx in
                                           range(1, objCfg.varNumCls)]),
        predicate_classes=tuple('predicate_' + str(idx).zfill(2)
                                for idx in range(objCfg.varNumPrd)))

    objRng = np.random.default_rng(varSeed)
    varDgt = len(str(max(objCfg.varNumVid - 1, 0)))
    lstVid = []

    for idxVid in range(objCfg.varNumVid):

        varNumFrm = int(objRng.integers(varFrmMin, varFrmMax + 1))
        varNumPair = int(objRng.integers(varPairMin, varPairMax + 1))

        # Unique object categories (actor excluded), in ascending order:
        vecCat = np.sort(objRng.choice(np.arange(1, objCfg.varNumCls),
                                       size=varNumPair, replace=False))

        # Actor trajectory and box size:
        vecAct = objRng.uniform(0.3, 0.7, size=2)
        vecActSze = objRng.uniform(0.15, 0.3, size=2)
        aryObjSze = objRng.uniform(0.08, 0.16, size=(varNumPair, 2))

        # Markov chains of predicates, one per pair:
        aryPrd = np.zeros((varNumFrm, varNumPair), dtype=np.int64)
        aryPrd[0, :] = objRng.integers(0, objCfg.varNumPrd, size=varNumPair)
        for idxFrm in range(1, varNumFrm):
            for idxPair in range(varNumPair):
                aryPrd[idxFrm, idxPair] = objRng.choice(
                    objCfg.varNumPrd, p=aryTrans[aryPrd[idxFrm - 1, idxPair]])

        lstFrm = []
        for idxFrm in range(varNumFrm):
            vecAct = np.clip(vecAct + objRng.normal(0.0, varSdJit, size=2),
                             0.2, 0.8)
            lstObj = [ObjectInstance(category=0,
                                     bbox=_box(vecAct[0], vecAct[1],
                                               vecActSze[0], vecActSze[1]))]
            lstTrp = []
            for idxPair in range(varNumPair):
                vecCtr = (vecAct + aryOff[aryPrd[idxFrm, idxPair]]
                          + objRng.normal(0.0, varSdJit, size=2))
                lstObj.append(ObjectInstance(
                    category=int(vecCat[idxPair]),
                    bbox=_box(vecCtr[0], vecCtr[1], aryObjSze[idxPair, 0],
                              aryObjSze[idxPair, 1])))
                lstTrp.append(RelationshipTriplet(
                    subject_idx=0, object_idx=idxPair + 1,
                    predicate=int(aryPrd[idxFrm, idxPair])))
            lstFrm.append(SceneGraph(frame_index=idxFrm,
                                     objects=tuple(lstObj),
                                     triplets=tuple(lstTrp)))

        lstVid.append(VideoAnnotation(video_id='synth_'
                                      + str(idxVid).zfill(varDgt),
                                      frames=tuple(lstFrm),
                                      taxonomy=objTax))

    return lstVid


def persistence_recall_oracle(aryTrans, varHrz, vecInit=None):
    """
    Expected recall of copying the last observed predicate forward.

    Parameters
    ----------
    aryTrans : np.array
        Transition matrix, shape [|P|, |P|].
    varHrz : int
        Number of frames between the last observed and the evaluated frame.
    vecInit : np.array or None
        Predicate distribution at the last observed frame (default: uniform,
        which is stationary for all presets).

    Returns
    -------
    varRcl : float
        Probability that the predicate is unchanged after `varHrz` steps.
    """
    aryTrans = np.asarray(aryTrans, dtype=np.float64)
    varNumPrd = aryTrans.shape[0]
    if vecInit is None:
        vecInit = np.full(varNumPrd, 1.0 / varNumPrd)
    aryPow = np.linalg.matrix_power(aryTrans, int(varHrz))
    return float(np.sum(vecInit * np.diag(aryPow)))
