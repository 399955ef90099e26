# -*- coding: utf-8 -*-
"""Autoregressive anticipatory transformer baselines."""

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

from pysga.analysis import autodiff as ad
from pysga.analysis.encoders import (init_encoder, encoder_stack, causal_mask,
                                     key_mask, encode_video)
from pysga.analysis.heads_losses import (mlp_head, decode_distributions,
                                         observed_terms, anticipated_terms,
                                         window_starts, window_multiplicity,
                                         window_rows)
from pysga.analysis.utilities import ContractError, ConfigError


# Baseline variants:
lstVariants = ['baseline_plus', 'baseline_plus_plus']


def init_anticipator(dicPrm, varDim, varDimFfn, varNumLyr, varMaxFrm, objRng):
    """Add the causal transformer `ant_tf` and its position table."""
    init_encoder(dicPrm, 'ant_tf', varDim, varDimFfn, varNumLyr, objRng)
    dicPrm['ant_pos'] = ad.parameter(
        objRng.normal(0.0, 0.02, size=(varMaxFrm, varDim)), 'ant_pos')


def anticipator_forward(objCtx, aryPrs, dicPrm, varNumLyr=1, varNumHead=1):
    """
    Causal transformer pass over relationship histories.

    Parameters
    ----------
    objCtx : Tensor
        Context, shape [P, L, d].
    aryPrs : np.array
        Presence of context entries, shape [P, L] (bool).

    Returns
    -------
    objOut : Tensor
        Shape [P, L, d]; entry [p, l] is the prediction of position l + 1.
    """
    varLen = objCtx.shape[1]
    objPos = dicPrm['ant_pos']
    if varLen > objPos.shape[0]:
        raise ContractError('Context of ' + str(varLen) + ' frames exceeds '
                            + 'the positional table (' + str(objPos.shape[0])
                            + ' frames).')
    objIn = ad.add(objCtx, ad.index(objPos, slice(0, varLen)))
    aryMsk = causal_mask(varLen)[None, :, :] & key_mask(aryPrs)
    return encoder_stack(objIn, aryMsk, dicPrm, 'ant_tf', varNumLyr=varNumLyr,
                         varNumHead=varNumHead)


def anticipate_autoregressive(objCtx, varHrz, dicPrm, aryPrs=None,
                              varNumLyr=1, varNumHead=1):
    """
    Generate future representations one frame at a time.

    Parameters
    ----------
    objCtx : Tensor
        Non-empty context, shape [P, L, d].
    varHrz : int
        Number of frames to generate (0 gives an empty output).
    dicPrm : dict
        Model parameters.
    aryPrs : np.array or None
        Presence of context entries, shape [P, L] (default: all present).

    Returns
    -------
    lstOut : list of Tensor
        Generated representations, shape [P, d] each, in order.
    objCtx : Tensor
        Context extended by the generated frames, shape [P, L + varHrz, d].
    """
    if objCtx.ndim != 3 or objCtx.shape[1] < 1:
        raise ContractError('Autoregression needs a non-empty context.')
    varNumPair = objCtx.shape[0]
    if aryPrs is None:
        aryPrs = np.ones(objCtx.shape[:2], dtype=bool)
    lstOut = []
    for _ in range(varHrz):
        objY = anticipator_forward(objCtx, aryPrs, dicPrm,
                                   varNumLyr=varNumLyr, varNumHead=varNumHead)
        objNxt = ad.index(objY, (slice(None), -1))
        lstOut.append(objNxt)
        objCtx = ad.concat([objCtx, ad.reshape(objNxt, (varNumPair, 1, -1))],
                           axis=1)
        aryPrs = np.concatenate([aryPrs, np.ones((varNumPair, 1), dtype=bool)],
                                axis=1)
    return lstOut, objCtx


def variant_context(objVt, dicPrm, strModel, varNumLyr=1, varNumHead=1,
                    lgcTmpEnc=True):
    """
    Encode a video for a baseline variant.

    Returns
    -------
    dicEnc : dict
        Encoder outputs (see `encode_video`) plus 'seq', the sequence the
        anticipator consumes, shape [P, T, d]: spatial outputs for the plus
        variant, temporal outputs for plus-plus (spatial if `lgcTmpEnc` is
        false).
    """
    if strModel not in lstVariants:
        raise ConfigError('Unknown baseline variant: ' + str(strModel))
    lgcTmp = (strModel == 'baseline_plus_plus') and lgcTmpEnc
    dicEnc = encode_video(objVt, dicPrm, varNumLyr=varNumLyr,
                          varNumHead=varNumHead, lgcTmp=lgcTmp)
    if dicEnc['spa'] is None:
        dicEnc['seq'] = None
    elif lgcTmp:
        dicEnc['seq'] = dicEnc['tmp']
    else:
        dicEnc['seq'] = ad.transpose(dicEnc['spa'], (1, 0, 2))
    return dicEnc


def run_variant(objVt, dicPrm, strModel, varNumObs, varHrz, varNumLyr=1,
                varNumHead=1, lgcTmpEnc=True, dicEnc=None, lgcObs=True):
    """
    Anticipate predicate distributions with a baseline variant.

    Parameters
    ----------
    objVt : VideoTensors
        Video arrays; frames 0 .. varNumObs - 1 are observed.
    dicPrm : dict
        Model parameters.
    strModel : str
        'baseline_plus' or 'baseline_plus_plus'.
    varNumObs : int
        Number of observed frames T.
    varHrz : int
        Number of frames to anticipate.
    lgcTmpEnc : bool
        Run the temporal encoder before anticipation (plus-plus only).
    dicEnc : dict or None
        Output of `variant_context` for the whole video, to share one
        encoding between several observed lengths.
    lgcObs : bool
        Decode the observed frames with the generation head (plus-plus).

    Returns
    -------
    dicOut : dict
        'ant' : list (one per future frame) of lists of PredicateDistribution
        for the pairs present at frame T - 1;
        'obs' : list (one per observed frame) of lists of PredicateDistribution
        from the generation head (plus-plus only, else None).
    """
    if varNumObs < 1 or varNumObs > objVt.num_frames:
        raise ContractError('Observed length ' + str(varNumObs)
                            + ' out of range.')
    dicOut = {'ant': [[] for _ in range(varHrz)], 'obs': None}
    vecLgcPair = objVt.aryPrsPair[varNumObs - 1]

    with ad.no_grad():
        if dicEnc is None:
            dicEnc = variant_context(objVt, dicPrm, strModel,
                                     varNumLyr=varNumLyr,
                                     varNumHead=varNumHead,
                                     lgcTmpEnc=lgcTmpEnc)
        if dicEnc['seq'] is None:
            return dicOut
        objCtx = ad.index(dicEnc['seq'], (slice(None), slice(0, varNumObs)))
        lstOut, _ = anticipate_autoregressive(
            objCtx, varHrz, dicPrm, aryPrs=objVt.aryPrsPair[:varNumObs].T,
            varNumLyr=varNumLyr, varNumHead=varNumHead)
        dicOut['ant'] = [decode_distributions(
            mlp_head(objOut, dicPrm, 'head_ant').data, vecLgcPair)
            for objOut in lstOut]
        if strModel == 'baseline_plus_plus' and lgcObs:
            objLgt = mlp_head(objCtx, dicPrm, 'head_gen').data
            dicOut['obs'] = [decode_distributions(
                objLgt[:, idxFrm], objVt.aryPrsPair[idxFrm])
                for idxFrm in range(varNumObs)]
    return dicOut


def baseline_loss_terms(objVt, dicPrm, strModel, objLmb, varHrz,
                        lgcTchFrc=True, varNumLyr=1, varNumHead=1):
    """
    Observed and anticipated loss terms of a baseline variant on one video.

    Parameters
    ----------
    objVt : VideoTensors
        Video arrays.
    dicPrm : dict
        Model parameters.
    strModel : str
        'baseline_plus' or 'baseline_plus_plus'.
    objLmb : LossWeights
        Loss weights (zero weights skip terms).
    varHrz : int
        Training anticipation horizon.
    lgcTchFrc : bool
        Teacher forcing: one causal pass over the whole video, each frame's
        prediction weighted by the number of windows that anticipate it.
        Otherwise every window is rolled out autoregressively.

    Returns
    -------
    dicObs : dict
    lstAnt : list of dict
    tplAcc : tuple of int
        (correct top-1 anticipations, labelled anticipated rows).
    """
    dicEnc = variant_context(objVt, dicPrm, strModel, varNumLyr=varNumLyr,
                             varNumHead=varNumHead)
    dicObs = observed_terms(objVt, dicEnc, dicPrm, objLmb,
                            lgcGen=(strModel == 'baseline_plus_plus'))
    lstObs = window_starts(objVt.num_frames, varHrz)
    if dicEnc['seq'] is None or len(lstObs) == 0:
        return dicObs, [], (0, 0)
    objSeq = dicEnc['seq']
    aryPrs = objVt.aryPrsPair.T

    if lgcTchFrc:
        objY = anticipator_forward(objSeq, aryPrs, dicPrm,
                                   varNumLyr=varNumLyr, varNumHead=varNumHead)
        vecMlt = window_multiplicity(objVt.num_frames, varHrz)
        # Frame t is predicted from the output at t - 1 for pairs at t - 1:
        lstFrm = []
        lstPair = []
        for varFrm in np.flatnonzero(vecMlt):
            vecPair = np.flatnonzero(objVt.aryPrsPair[varFrm - 1])
            lstFrm.append(np.full(vecPair.shape, varFrm, dtype=np.int64))
            lstPair.append(vecPair)
        vecRowObs = np.concatenate(lstFrm)
        vecRowPair = np.concatenate(lstPair)
        if vecRowObs.size == 0:
            return dicObs, [], (0, 0)
        objZ = ad.index(objY, (vecRowPair, vecRowObs - 1))
        dicAnt, tplAcc = anticipated_terms(
            [objZ], vecRowObs, vecRowPair, objVt, objSeq, dicPrm, objLmb,
            vecRowWgt=vecMlt[vecRowObs].astype(np.float64))
        return dicObs, [dicAnt], tplAcc

    vecRowObs, vecRowPair = window_rows(objVt, lstObs)
    if vecRowObs.size == 0:
        return dicObs, [], (0, 0)
    lstZant = [[] for _ in range(varHrz)]
    for varObs in lstObs:
        vecPair = np.flatnonzero(objVt.aryPrsPair[varObs - 1])
        if vecPair.size == 0:
            continue
        objCtx = ad.index(objSeq, (slice(None), slice(0, varObs)))
        lstOut, _ = anticipate_autoregressive(
            objCtx, varHrz, dicPrm, aryPrs=aryPrs[:, :varObs],
            varNumLyr=varNumLyr, varNumHead=varNumHead)
        for idxHrz, objOut in enumerate(lstOut):
            lstZant[idxHrz].append(ad.index(objOut, vecPair))
    lstZant = [ad.concat(lstZ, axis=0) for lstZ in lstZant]
    dicAnt, tplAcc = anticipated_terms(lstZant, vecRowObs, vecRowPair, objVt,
                                       objSeq, dicPrm, objLmb)
    return dicObs, [dicAnt], tplAcc
