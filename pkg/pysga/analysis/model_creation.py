# -*- coding: utf-8 -*-
"""Create model parameters and dispatch losses and predictions per model."""

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

import numpy as np
from scipy.special import softmax

from pysga.analysis import autodiff as ad
from pysga.analysis.encoders import (varDimGeo, init_linear, init_encoder,
                                     encode_video)
from pysga.analysis.latent_dynamics import (SolverSpec, init_vector_field,
                                            anticipate_latent)
from pysga.analysis.anticipator import (lstVariants, init_anticipator,
                                        variant_context, run_variant,
                                        baseline_loss_terms)
from pysga.analysis.heads_losses import (LossWeights, dicAblate, init_heads,
                                         mlp_head, observed_terms,
                                         anticipated_terms, total_loss,
                                         window_starts, window_rows)
from pysga.analysis.utilities import ConfigError, derive_seed


# Trainable models:
lstModels = ['scenesayer_ode', 'scenesayer_sde', 'baseline_plus',
             'baseline_plus_plus']

# Parameter-free comparison model (evaluation only):
strPersistence = 'persistence'


def model_dims(cfg):
    """Object feature and relationship representation dimensions."""
    varDimObj = cfg.varDimCat + varDimGeo
    varDimRel = 3 * cfg.varDimProj + 2 * cfg.varDimSem
    return varDimObj, varDimRel


def create_params(cfg, varNumCls, varNumPrd):
    """
    Initialise the parameters of a model.

    Parameters
    ----------
    cfg : cls_set_config
        Config namespace (model kind, dimensions, seed).
    varNumCls : int
        Number of object categories.
    varNumPrd : int
        Number of predicate classes.

    Returns
    -------
    dicPrm : dict
        Named parameter tensors, sorted by name.
    """
    if cfg.strModel not in lstModels:
        raise ConfigError('Cannot create parameters for model '
                          + str(cfg.strModel))
    print('------Create model parameters (' + cfg.strModel + ')')

    objRng = np.random.default_rng(derive_seed(cfg.varSeed, 0))
    varDimObj, varDimRel = model_dims(cfg)
    dicPrm = {}

    # Object representation:
    dicPrm['obj_cat_emb'] = ad.parameter(
        objRng.normal(0.0, 0.1, size=(varNumCls, cfg.varDimCat)),
        'obj_cat_emb')
    init_encoder(dicPrm, 'obj_enc', varDimObj, cfg.varDimFfn, cfg.varNumLyr,
                 objRng)

    # Pairwise relationship construction:
    init_linear(dicPrm, 'pair.w1', varDimObj, cfg.varDimProj, objRng,
                lgcBias=False)
    init_linear(dicPrm, 'pair.w2', varDimObj, cfg.varDimProj, objRng,
                lgcBias=False)
    init_linear(dicPrm, 'pair.w3', varDimGeo, cfg.varDimProj, objRng,
                lgcBias=False)
    dicPrm['sem_emb'] = ad.parameter(
        objRng.normal(0.0, 0.1, size=(varNumCls, cfg.varDimSem)), 'sem_emb')

    # Spatial and temporal context:
    init_encoder(dicPrm, 'spa_enc', varDimRel, cfg.varDimFfn, cfg.varNumLyr,
                 objRng)
    if cfg.strModel != 'baseline_plus':
        init_encoder(dicPrm, 'tmp_enc', varDimRel, cfg.varDimFfn,
                     cfg.varNumLyr, objRng)
        dicPrm['tmp_pos'] = ad.parameter(
            objRng.normal(0.0, 0.02, size=(cfg.varMaxFrm, varDimRel)),
            'tmp_pos')

    # Generative model:
    if cfg.strModel == 'scenesayer_ode':
        init_vector_field(dicPrm, 'ode_f', varDimRel, cfg.varDimHid, objRng)
    elif cfg.strModel == 'scenesayer_sde':
        init_vector_field(dicPrm, 'sde_mu', varDimRel, cfg.varDimHid, objRng)
        init_vector_field(dicPrm, 'sde_sigma', varDimRel, cfg.varDimHid,
                          objRng)
    else:
        init_anticipator(dicPrm, varDimRel, cfg.varDimFfn, cfg.varNumLyr,
                         cfg.varMaxFrm, objRng)

    init_heads(dicPrm, varDimRel, varDimObj, cfg.varDimHid, varNumCls,
               varNumPrd, objRng)

    varNumVal = int(np.sum([objPrm.data.size for objPrm in dicPrm.values()]))
    print('---------Number of parameters: ' + str(varNumVal))

    return {strKey: dicPrm[strKey] for strKey in sorted(dicPrm)}


def solver_spec(cfg):
    """Solver specification of the config."""
    return SolverSpec(method=cfg.strSolver, h=cfg.varStepSize)


def model_loss(objVt, dicPrm, cfg, objLmb, varSeed=0):
    """
    Training objective of one video.

    Parameters
    ----------
    objVt : VideoTensors
        Video arrays.
    dicPrm : dict
        Model parameters.
    cfg : cls_set_config
        Config namespace.
    objLmb : LossWeights
        Loss weights.
    varSeed : int
        Brownian seed (SDE model).

    Returns
    -------
    objLoss : Tensor
        Scalar loss recorded on the tape.
    dicTrm : dict
        Unweighted value of each term (float, 0.0 if absent).
    tplAcc : tuple of int
        (correct top-1 anticipations, labelled anticipated rows).
    """
    if cfg.strModel in lstVariants:
        dicObs, lstAnt, tplAcc = baseline_loss_terms(
            objVt, dicPrm, cfg.strModel, objLmb, cfg.varTrnHrz,
            lgcTchFrc=cfg.lgcTchFrc, varNumLyr=cfg.varNumLyr,
            varNumHead=cfg.varNumHead)
    else:
        dicEnc = encode_video(objVt, dicPrm, varNumLyr=cfg.varNumLyr,
                              varNumHead=cfg.varNumHead)
        dicObs = observed_terms(objVt, dicEnc, dicPrm, objLmb)
        lstAnt = []
        tplAcc = (0, 0)
        lstObs = window_starts(objVt.num_frames, cfg.varTrnHrz)
        vecRowObs, vecRowPair = window_rows(objVt, lstObs)
        if dicEnc['tmp'] is not None and vecRowObs.size > 0:
            # Initial conditions: temporal encoding at the last observed frame.
            objZ0 = ad.index(dicEnc['tmp'], (vecRowPair, vecRowObs - 1))
            lstZ = anticipate_latent(objZ0, cfg.varTrnHrz, dicPrm,
                                     solver_spec(cfg), cfg.strModel,
                                     varSeed=varSeed)
            dicAnt, tplAcc = anticipated_terms(
                lstZ, vecRowObs, vecRowPair, objVt, dicEnc['tmp'], dicPrm,
                objLmb, lgcBoxActOnly=cfg.lgcBoxActOnly)
            lstAnt = [dicAnt]

    objLoss = total_loss(dicObs, lstAnt, objLmb)

    dicTrm = {'gen': 0.0, 'object': 0.0, 'ant': 0.0, 'boxes': 0.0,
              'recon': 0.0}
    for dicIn in [dicObs] + lstAnt:
        for strKey, objTrm in dicIn.items():
            if objTrm is not None:
                dicTrm[strKey] += float(objTrm.data)
    return objLoss, dicTrm, tplAcc


def predict_windows(objVt, dicPrm, cfg, lstObs, varHrz, varSeed=0):
    """
    Anticipated predicate probabilities for several observation windows.

    Parameters
    ----------
    objVt : VideoTensors
        Video arrays.
    dicPrm : dict or None
        Model parameters (None for the persistence model).
    cfg : cls_set_config
        Config namespace (`strModel`, `varNumSmp`, solver, dimensions).
    lstObs : list of int
        Observed lengths T (>= 1).
    varHrz : int
        Number of anticipated frames per window.
    varSeed : int
        Base Brownian seed (SDE model).

    Returns
    -------
    lstPrd : list of tuple
        Per window: (aryPrb [varHrz, P, |P|] probabilities,
        vecLgcPair [P] pairs present at frame T - 1).
    """
    varNumPrd = objVt.aryPos.shape[-1]
    varNumPair = objVt.num_pairs
    lstPrd = []

    if cfg.strModel == strPersistence:
        for varObs in lstObs:
            aryLst = objVt.aryPos[varObs - 1].astype(np.float64)
            vecNum = np.maximum(np.sum(aryLst, axis=-1, keepdims=True), 1.0)
            aryPrb = np.broadcast_to(aryLst / vecNum,
                                     (varHrz, varNumPair, varNumPrd)).copy()
            lstPrd.append((aryPrb, objVt.aryPrsPair[varObs - 1].copy()))
        return lstPrd

    with ad.no_grad():

        if cfg.strModel in lstVariants:
            dicEnc = variant_context(objVt, dicPrm, cfg.strModel,
                                     varNumLyr=cfg.varNumLyr,
                                     varNumHead=cfg.varNumHead)
            for varObs in lstObs:
                dicOut = run_variant(objVt, dicPrm, cfg.strModel, varObs,
                                     varHrz, varNumLyr=cfg.varNumLyr,
                                     varNumHead=cfg.varNumHead,
                                     dicEnc=dicEnc, lgcObs=False)
                vecLgcPair = objVt.aryPrsPair[varObs - 1].copy()
                # Distributions follow the present pairs in track order:
                vecIdxPair = np.flatnonzero(vecLgcPair)
                aryPrb = np.zeros((varHrz, varNumPair, varNumPrd))
                for idxHrz, lstDst in enumerate(dicOut['ant']):
                    for idxPair, objDst in zip(vecIdxPair, lstDst):
                        aryPrb[idxHrz, idxPair] = objDst.scores
                lstPrd.append((aryPrb, vecLgcPair))
            return lstPrd

        dicEnc = encode_video(objVt, dicPrm, varNumLyr=cfg.varNumLyr,
                              varNumHead=cfg.varNumHead)
        vecRowObs, vecRowPair = window_rows(objVt, lstObs)
        aryRowPrb = np.zeros((varHrz, vecRowObs.size, varNumPrd))
        if dicEnc['tmp'] is not None and vecRowObs.size > 0:
            objZ0 = ad.index(dicEnc['tmp'], (vecRowPair, vecRowObs - 1))
            varNumSmp = 1
            if cfg.strModel == 'scenesayer_sde':
                varNumSmp = cfg.varNumSmp
            for idxSmp in range(varNumSmp):
                lstZ = anticipate_latent(objZ0, varHrz, dicPrm,
                                         solver_spec(cfg), cfg.strModel,
                                         varSeed=derive_seed(varSeed, idxSmp))
                for idxHrz, objZ in enumerate(lstZ):
                    aryRowPrb[idxHrz] += softmax(
                        mlp_head(objZ, dicPrm, 'head_ant').data.astype(
                            np.float64), axis=-1)
            aryRowPrb /= varNumSmp

        assert list(lstObs) == sorted(set(lstObs)), 'Windows must be sorted.'
        # Scatter rows back to windows:
        vecWinIdx = np.searchsorted(np.asarray(lstObs), vecRowObs)
        for idxWin, varObs in enumerate(lstObs):
            aryPrb = np.zeros((varHrz, varNumPair, varNumPrd))
            vecRow = np.flatnonzero(vecWinIdx == idxWin)
            aryPrb[:, vecRowPair[vecRow], :] = aryRowPrb[:, vecRow, :]
            lstPrd.append((aryPrb, objVt.aryPrsPair[varObs - 1].copy()))
    return lstPrd


def loss_weights(cfg):
    """Loss weights of the config, with the ablated term set to zero."""
    lstLmb = list(cfg.lstLambda)
    if cfg.strLossAblate:
        lstLmb[dicAblate[cfg.strLossAblate]] = 0.0
    return LossWeights.from_list(lstLmb)
