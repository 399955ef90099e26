# -*- coding: utf-8 -*-
"""Evaluation protocol: Recall@K and mean Recall@K of anticipated graphs."""

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

import os
import io
import csv
import json
import multiprocessing as mp
from dataclasses import dataclass, field
import numpy as np

from pysga.analysis.scene_graph import (ObjectInstance, check_video_lengths,
                                        build_graph_with_constraint,
                                        build_graph_no_constraint)
from pysga.analysis.encoders import prepare_video
from pysga.analysis.heads_losses import decode_distributions, varMinObs
from pysga.analysis.metrics import (graph_triplets, ranked_triplets,
                                    RecallAccumulator)
from pysga.analysis.model_creation import predict_windows, strPersistence
from pysga.analysis.checkpoint import check_taxonomy
from pysga.analysis.utilities import (cls_set_config, derive_seed,
                                      write_atomic, print_progress,
                                      ConfigError,
                                      CompatibilityError)


# Graph building strategies:
lstStrategies = ['with_constraint', 'no_constraint']

# Config entries taken from the evaluation config rather than the checkpoint:
lstEvalKeys = ['varNumSmp', 'varBrwnSeed', 'lgcCntMis', 'varPar', 'lstK',
               'lstStrategy', 'varActorCat']

# Display names of models and solvers (ablation tables):
dicModelLbl = {'scenesayer_ode': 'SceneSayerODE',
               'scenesayer_sde': 'SceneSayerSDE',
               'baseline_plus': 'Baseline+',
               'baseline_plus_plus': 'Baseline++',
               strPersistence: 'Persistence'}
dicSolverLbl = {'euler': 'Euler',
                'adams_bashforth4': 'Adams-Bashforth 4',
                'euler_maruyama_ito': 'Euler-Maruyama (Ito)',
                'reversible_heun_stratonovich':
                    'Reversible Heun (Stratonovich)'}

# Report file names:
strFleCsv = 'metrics.csv'
strFleJson = 'metrics.json'
strFleAbl = 'ablation.csv'


# *****************************************************************************
# *** Regimes and reports

@dataclass(frozen=True)
class EvalRegime:
    """
    Evaluation regime.

    Attributes
    ----------
    kind : str
        'context_fraction' (observe a fraction F of each video, anticipate the
        rest) or 'future_frames' (for every observed length T, evaluate frame
        T + H_e only).
    fraction : float or None
        Context fraction F in (0, 1].
    horizon : int or None
        Future frame H_e >= 1.
    """

    kind: str
    fraction: float = None
    horizon: int = None

    def __post_init__(self):
        if self.kind == 'context_fraction':
            if self.fraction is None or self.horizon is not None:
                raise ConfigError('Context fraction regime needs exactly a '
                                  + 'fraction.')
            if not (0.0 < self.fraction <= 1.0):
                raise ConfigError('Context fraction must lie in (0, 1], got '
                                  + str(self.fraction))
        elif self.kind == 'future_frames':
            if self.horizon is None or self.fraction is not None:
                raise ConfigError('Future frame regime needs exactly a '
                                  + 'horizon.')
            if int(self.horizon) < 1:
                raise ConfigError('Future frame must be >= 1, got '
                                  + str(self.horizon))
        else:
            raise ConfigError('Unknown evaluation regime: ' + str(self.kind))

    @property
    def label(self):
        if self.kind == 'context_fraction':
            return 'context_fraction=' + str(self.fraction)
        return 'future_frame=' + str(self.horizon)


def regimes_from_config(cfg):
    """Evaluation regimes of the config, context fractions first."""
    lstRgm = [EvalRegime(kind='context_fraction', fraction=float(varFrc))
              for varFrc in cfg.lstCtxFrc]
    lstRgm += [EvalRegime(kind='future_frames', horizon=int(varHrz))
               for varHrz in cfg.lstFutFrm]
    if len(lstRgm) == 0:
        raise ConfigError('No evaluation regime configured (lstCtxFrc and '
                          + 'lstFutFrm are empty).')
    return lstRgm


def model_label(dicCnfg):
    """Table label of a model, naming the solver of latent dynamics models."""
    strModel = dicCnfg['strModel']
    strLbl = dicModelLbl.get(strModel, strModel)
    if strModel in ('scenesayer_ode', 'scenesayer_sde'):
        strLbl += ' ' + dicSolverLbl.get(dicCnfg['strSolver'],
                                         dicCnfg['strSolver'])
    return strLbl


@dataclass
class MetricReport:
    """
    Metrics of one model over a set of regimes.

    Attributes
    ----------
    model : str
        Model label.
    predicate_classes : list of str
        Names of the predicate classes.
    lstRow : list of dict
        One entry per (regime, strategy, K) with 'regime', 'strategy', 'K',
        'recall', 'mean_recall' and 'per_class' (list, NaN for absent
        classes).
    dicSkp : dict
        Number of skipped (too short) videos per regime label.
    dicNumVid : dict
        Number of evaluated videos per regime label.
    varBrwnSeed : int
        Base seed of the Brownian paths.
    """

    model: str
    predicate_classes: list
    lstRow: list = field(default_factory=list)
    dicSkp: dict = field(default_factory=dict)
    dicNumVid: dict = field(default_factory=dict)
    varBrwnSeed: int = 0

    def lookup(self, strRgm, strStr, varK):
        """Row of a regime label, strategy and K."""
        for dicRow in self.lstRow:
            if (dicRow['regime'] == strRgm and dicRow['strategy'] == strStr
                    and dicRow['K'] == varK):
                return dicRow
        raise KeyError((strRgm, strStr, varK))


def _fmt(varVal):
    """Fixed float formatting for reports."""
    return 'nan' if np.isnan(varVal) else '{:.6f}'.format(varVal)


def _json_val(varVal):
    return None if np.isnan(varVal) else float(varVal)


def report_csv(objRpt):
    """CSV text of a report."""
    objBuf = io.StringIO()
    objWrt = csv.writer(objBuf, lineterminator='\n')
    objWrt.writerow(['model', 'regime', 'strategy', 'K', 'recall',
                     'mean_recall'])
    for dicRow in objRpt.lstRow:
        objWrt.writerow([objRpt.model, dicRow['regime'], dicRow['strategy'],
                         dicRow['K'], _fmt(dicRow['recall']),
                         _fmt(dicRow['mean_recall'])])
    return objBuf.getvalue()


def report_json(objRpt):
    """JSON text of a report, with per-class recalls."""
    lstRes = []
    for dicRow in objRpt.lstRow:
        lstRes.append({
            'regime': dicRow['regime'],
            'strategy': dicRow['strategy'],
            'K': dicRow['K'],
            'recall': _json_val(dicRow['recall']),
            'mean_recall': _json_val(dicRow['mean_recall']),
            'per_class_recall': {
                strCls: _json_val(varVal) for strCls, varVal in
                zip(objRpt.predicate_classes, dicRow['per_class'])}})
    dicOut = {'model': objRpt.model,
              'brownian_seed': int(objRpt.varBrwnSeed),
              'skipped_videos': objRpt.dicSkp,
              'evaluated_videos': objRpt.dicNumVid,
              'results': lstRes}
    return json.dumps(dicOut, sort_keys=True, indent=1)


def write_report(objRpt, strPathOut):
    """Write `metrics.csv` and `metrics.json` into the output directory."""
    if not os.path.isdir(strPathOut):
        os.makedirs(strPathOut)
    write_atomic(os.path.join(strPathOut, strFleCsv),
                 report_csv(objRpt).encode('utf-8'))
    write_atomic(os.path.join(strPathOut, strFleJson),
                 report_json(objRpt).encode('utf-8'))
# *****************************************************************************


# *****************************************************************************
# *** Per-video evaluation

def predicted_objects(objVt, varObs):
    """
    Objects of an anticipated graph: actor and the tracks of the pairs present
    at the last observed frame, in track order.
    """
    idxLst = varObs - 1
    lstObj = [ObjectInstance(category=int(objVt.vecTrkCat[0]),
                             bbox=tuple(objVt.aryBox[idxLst, 0]))]
    for idxPair in np.flatnonzero(objVt.aryPrsPair[idxLst]):
        lstObj.append(ObjectInstance(
            category=int(objVt.vecTrkCat[idxPair + 1]),
            bbox=tuple(objVt.aryBox[idxLst, idxPair + 1])))
    return lstObj


def anticipated_rankings(aryPrb, vecLgcPair, lstObj, varFrmIdx, varKmax):
    """
    Ranked triplets of one anticipated frame under both strategies.

    Parameters
    ----------
    aryPrb : np.array
        Predicate probabilities of all pairs, shape [P, |P|].
    vecLgcPair : np.array
        Pairs present at the last observed frame, shape [P].
    lstObj : list of ObjectInstance
        Objects of the anticipated graph (see `predicted_objects`).
    varFrmIdx : int
        Frame index of the anticipated frame.
    varKmax : int
        Largest K evaluated (truncation of the no constraint graph).

    Returns
    -------
    dicRnk : dict
        Ranked triplets per strategy.
    """
    lstDst = decode_distributions(aryPrb, vecLgcPair, lgcLgt=False)
    objWith = build_graph_with_constraint(lstDst, lstObj,
                                          varFrmIdx=varFrmIdx)
    objNo = build_graph_no_constraint(lstDst, lstObj, k_cap=varKmax,
                                      varFrmIdx=varFrmIdx)
    return {'with_constraint': ranked_triplets(objWith),
            'no_constraint': ranked_triplets(objNo)}


def evaluation_windows(varNumFrm, objRgm):
    """
    Observed lengths and horizon of a regime for a video of N frames.

    Returns
    -------
    lstObs : list of int
        Observed lengths T (empty if the video is too short).
    varHrz : int
        Number of anticipated frames per window.
    lgcLstOnly : bool
        Whether only the last anticipated frame of each window is evaluated.
    """
    if objRgm.kind == 'context_fraction':
        varObs = max(varMinObs, int(np.floor(objRgm.fraction * varNumFrm)))
        varHrz = varNumFrm - varObs
        if varHrz < 1:
            return [], 0, False
        return [varObs], varHrz, False
    varHrz = int(objRgm.horizon)
    return list(range(varMinObs, varNumFrm - varHrz + 1)), varHrz, True


def evaluate_video(objVid, objVt, dicPrm, cfg, objRgm, varSeed, dicAcc):
    """
    Add the frames of one video to the accumulators of a regime.

    Parameters
    ----------
    objVid : VideoAnnotation
        Ground truth.
    objVt : VideoTensors
        Array view of the video.
    dicPrm : dict or None
        Model parameters (None for the persistence model).
    cfg : cls_set_config
        Evaluation config namespace.
    objRgm : EvalRegime
        Regime.
    varSeed : int
        Brownian seed of the video.
    dicAcc : dict
        Accumulator per (strategy, K).

    Returns
    -------
    lgcEvl : bool
        False if the video is too short for the regime (skipped).
    """
    lstObs, varHrz, lgcLstOnly = evaluation_windows(objVt.num_frames, objRgm)
    if len(lstObs) == 0:
        return False

    lstPrd = predict_windows(objVt, dicPrm, cfg, lstObs, varHrz,
                             varSeed=varSeed)
    varKmax = int(max(cfg.lstK))

    for objAcc in dicAcc.values():
        objAcc.begin_video()

    for varObs, (aryPrb, vecLgcPair) in zip(lstObs, lstPrd):

        lstObj = predicted_objects(objVt, varObs)

        # Ground truth restricted to objects seen while observing:
        setCat = None
        if not cfg.lgcCntMis:
            setCat = set(int(varCat) for varCat in
                         objVt.vecTrkCat[np.any(objVt.aryPrsObj[:varObs],
                                                axis=0)])

        lstStp = [varHrz] if lgcLstOnly else list(range(1, varHrz + 1))
        for varStp in lstStp:
            idxFrm = varObs - 1 + varStp
            objGt = objVid.frames[idxFrm]
            lstGt = graph_triplets(objGt, setCat)
            dicRnk = anticipated_rankings(aryPrb[varStp - 1], vecLgcPair,
                                          lstObj, objGt.frame_index, varKmax)
            for (strStr, varK), objAcc in dicAcc.items():
                objAcc.add_frame(lstGt, dicRnk[strStr], varK)

    for objAcc in dicAcc.values():
        objAcc.end_video()
    return True


def evaluate_chunk(idxPrc, lstVid, vecVidIdx, dicPrm, dicEvl, lstRgm,
                   queOut=None):
    """
    Evaluate a chunk of videos under all regimes.

    Parameters
    ----------
    idxPrc : int
        Process ID of the process calling this function.
    lstVid : list of VideoAnnotation
        Videos of the chunk.
    vecVidIdx : list of int
        Corpus index of each video (Brownian seed derivation).
    dicPrm : dict or None
        Model parameters.
    dicEvl : dict
        Evaluation config.
    lstRgm : list of EvalRegime
        Regimes.
    queOut : multiprocessing.queues.Queue or None
        Queue to put the results on; if None, the results are returned.

    Returns
    -------
    lstOut : list
        [idxPrc, dicAcc, dicSkp, objErr]: accumulators per (regime label,
        strategy, K), skipped videos per regime label, and the exception that
        stopped the chunk (None on success).
    """
    cfg = cls_set_config(dicEvl)
    varNumPrd = lstVid[0].taxonomy.num_predicates if lstVid else 0
    dicAcc = {}
    dicSkp = {}
    objErr = None
    try:
        for objRgm in lstRgm:
            dicSkp[objRgm.label] = 0
            for strStr in cfg.lstStrategy:
                for varK in cfg.lstK:
                    dicAcc[(objRgm.label, strStr, int(varK))] = \
                        RecallAccumulator(varNumPrd)

        for idxCnt, (idxVid, objVid) in enumerate(zip(vecVidIdx, lstVid)):
            objVt = prepare_video(objVid, varActorCat=cfg.varActorCat)
            varSeed = derive_seed(cfg.varBrwnSeed, int(idxVid))
            for objRgm in lstRgm:
                dicRgmAcc = {(strStr, varK): objAcc for (strRgm, strStr, varK),
                             objAcc in dicAcc.items()
                             if strRgm == objRgm.label}
                if not evaluate_video(objVid, objVt, dicPrm, cfg, objRgm,
                                      varSeed, dicRgmAcc):
                    dicSkp[objRgm.label] += 1

            # Status indicator only for the first process:
            if idxPrc == 0:
                print_progress(idxCnt + 1, len(lstVid), 'videos')

    except Exception as objExc:
        # Sent back to the parent, which re-raises it:
        objErr = objExc

    lstOut = [idxPrc, dicAcc, dicSkp, objErr]
    if queOut is None:
        return lstOut
    queOut.put(lstOut)
# *****************************************************************************


# *****************************************************************************
# *** Evaluation of a model

def evaluation_config(objCkpt, dicCnfg):
    """
    Config of an evaluation run: model entries from the checkpoint, evaluation
    entries from the current config. Without checkpoint, the persistence
    model is evaluated.
    """
    if objCkpt is None:
        dicEvl = dict(dicCnfg)
        dicEvl['strModel'] = strPersistence
    else:
        dicEvl = dict(objCkpt.config)
    for strKey in lstEvalKeys:
        dicEvl[strKey] = dicCnfg[strKey]
    for strStr in dicEvl['lstStrategy']:
        if strStr not in lstStrategies:
            raise ConfigError('Unknown graph building strategy: '
                              + str(strStr))
    if len(dicEvl['lstK']) == 0:
        raise ConfigError('No K configured for Recall@K.')
    return dicEvl


def evaluate(objCkpt, lstVid, lstRgm, dicCnfg):
    """
    Evaluate a model on a corpus.

    Parameters
    ----------
    objCkpt : Checkpoint or None
        Trained model; None evaluates the persistence model (copy the last
        observed graph into all anticipated frames).
    lstVid : list of VideoAnnotation
        Evaluation corpus.
    lstRgm : list of EvalRegime
        Regimes.
    dicCnfg : dict
        Resolved config (K values, strategies, seeds, parallelisation).

    Returns
    -------
    objRpt : MetricReport
        One row per (regime, strategy, K).

    Notes
    -----
    Recall is computed per anticipated frame, averaged over the frames of a
    video, then over videos. Videos are split into `varPar` chunks evaluated
    in parallel processes; the results are merged in corpus order, so the
    report does not depend on `varPar`.
    """
    dicEvl = evaluation_config(objCkpt, dicCnfg)
    cfg = cls_set_config(dicEvl)
    strLbl = model_label(dicEvl)
    print('------Evaluate ' + strLbl + ' on ' + str(len(lstVid)) + ' videos')

    lstCls = []
    if len(lstVid) > 0:
        objTax = lstVid[0].taxonomy
        lstCls = list(objTax.predicate_classes)
        for objVid in lstVid:
            if objVid.taxonomy != objTax:
                raise CompatibilityError('Videos of the corpus use different '
                                         + 'taxonomies.')
        if objCkpt is not None:
            check_taxonomy(objCkpt.dicHdr, objTax)
            check_video_lengths(lstVid, int(cfg.varMaxFrm))

    dicPrm = None if objCkpt is None else objCkpt.dicPrm

    # Chunks of consecutive videos:
    varPar = max(1, min(int(cfg.varPar), len(lstVid)))
    vecIdxChnks = np.linspace(0, len(lstVid), num=varPar, endpoint=False)
    vecIdxChnks = np.hstack((vecIdxChnks, len(lstVid))).astype(np.int64)
    lstChnk = [list(range(vecIdxChnks[idxChnk], vecIdxChnks[idxChnk + 1]))
               for idxChnk in range(varPar)]

    if varPar == 1:
        lstRes = [evaluate_chunk(0, lstVid, lstChnk[0], dicPrm, dicEvl,
                                 lstRgm)]
    else:
        print('---------Creating parallel processes')
        lstRes = [None] * varPar
        lstPrcs = [None] * varPar
        queOut = mp.Queue()
        for idxPrc in range(varPar):
            lstPrcs[idxPrc] = mp.Process(
                target=evaluate_chunk,
                args=(idxPrc, [lstVid[idxVid] for idxVid in lstChnk[idxPrc]],
                      lstChnk[idxPrc], dicPrm, dicEvl, lstRgm, queOut))
            lstPrcs[idxPrc].daemon = True
        for idxPrc in range(varPar):
            lstPrcs[idxPrc].start()
        for idxPrc in range(varPar):
            lstRes[idxPrc] = queOut.get(True)
        for idxPrc in range(varPar):
            lstPrcs[idxPrc].join()
        # Restore chunk order:
        lstRes = sorted(lstRes, key=lambda lstOut: lstOut[0])

    for lstOut in lstRes:
        if lstOut[3] is not None:
            raise lstOut[3]

    # Merge chunks in corpus order:
    dicAcc = {}
    dicSkp = {objRgm.label: 0 for objRgm in lstRgm}
    for _, dicChnkAcc, dicChnkSkp, _ in lstRes:
        for tplKey, objAcc in dicChnkAcc.items():
            if tplKey in dicAcc:
                dicAcc[tplKey].merge(objAcc)
            else:
                dicAcc[tplKey] = objAcc
        for strRgm, varNum in dicChnkSkp.items():
            dicSkp[strRgm] += varNum

    objRpt = MetricReport(model=strLbl, predicate_classes=lstCls,
                          dicSkp=dicSkp, varBrwnSeed=int(cfg.varBrwnSeed))
    for objRgm in lstRgm:
        for strStr in cfg.lstStrategy:
            for varK in cfg.lstK:
                objAcc = dicAcc.get((objRgm.label, strStr, int(varK)),
                                    RecallAccumulator(len(lstCls)))
                varRcl, varMeanRcl, vecCls = objAcc.result()
                objRpt.lstRow.append({'regime': objRgm.label,
                                      'strategy': strStr, 'K': int(varK),
                                      'recall': varRcl,
                                      'mean_recall': varMeanRcl,
                                      'per_class': list(vecCls)})
                objRpt.dicNumVid[objRgm.label] = objAcc.num_videos
        print('---------' + objRgm.label + ': skipped '
              + str(dicSkp[objRgm.label]) + ' videos')

    for dicRow in objRpt.lstRow:
        print('---------' + dicRow['regime'] + ', ' + dicRow['strategy']
              + ', R@' + str(dicRow['K']) + ' = ' + _fmt(dicRow['recall'])
              + ', mR@' + str(dicRow['K']) + ' = '
              + _fmt(dicRow['mean_recall']))

    return objRpt
# *****************************************************************************


# *****************************************************************************
# *** Ablation tables

def run_ablation(lstCkpt, lstVid, lstRgm, dicCnfg):
    """
    Evaluate several checkpoints side by side.

    Parameters
    ----------
    lstCkpt : list of Checkpoint
        At least two trained models sharing one taxonomy.
    lstVid : list of VideoAnnotation
        Evaluation corpus.
    lstRgm : list of EvalRegime
        Regimes.
    dicCnfg : dict
        Resolved evaluation config.

    Returns
    -------
    lstHdr : list of str
        Column names: method, regime, then recall and mean recall per
        strategy and K.
    lstRow : list of list
        One row per (checkpoint, regime).
    lstRpt : list of MetricReport
        Report of each checkpoint.
    """
    if len(lstCkpt) < 2:
        raise ConfigError('Ablation needs at least two checkpoints, got '
                          + str(len(lstCkpt)))
    print('------Ablation over ' + str(len(lstCkpt)) + ' checkpoints')

    dicTax = lstCkpt[0].dicHdr['taxonomy']
    for idxCkpt, objCkpt in enumerate(lstCkpt[1:]):
        if objCkpt.dicHdr['taxonomy'] != dicTax:
            raise CompatibilityError('Checkpoint ' + str(idxCkpt + 1)
                                     + ' uses a different taxonomy than '
                                     + 'checkpoint 0')
    for objCkpt in lstCkpt:
        check_video_lengths(lstVid, int(objCkpt.config['varMaxFrm']))

    lstStr = list(dicCnfg['lstStrategy'])
    lstK = [int(varK) for varK in dicCnfg['lstK']]
    lstHdr = ['method', 'regime']
    for strStr in lstStr:
        for varK in lstK:
            lstHdr += [strStr + ' R@' + str(varK), strStr + ' mR@' + str(varK)]

    lstRpt = []
    lstRow = []
    for objCkpt in lstCkpt:
        objRpt = evaluate(objCkpt, lstVid, lstRgm, dicCnfg)
        lstRpt.append(objRpt)
        for objRgm in lstRgm:
            lstRow_ = [objRpt.model, objRgm.label]
            for strStr in lstStr:
                for varK in lstK:
                    dicRow = objRpt.lookup(objRgm.label, strStr, varK)
                    lstRow_ += [_fmt(dicRow['recall']),
                                _fmt(dicRow['mean_recall'])]
            lstRow.append(lstRow_)

    return lstHdr, lstRow, lstRpt


def write_ablation(lstHdr, lstRow, strPathOut):
    """Write the ablation table as `ablation.csv`."""
    if not os.path.isdir(strPathOut):
        os.makedirs(strPathOut)
    objBuf = io.StringIO()
    objWrt = csv.writer(objBuf, lineterminator='\n')
    objWrt.writerow(lstHdr)
    for lstRow_ in lstRow:
        objWrt.writerow(lstRow_)
    write_atomic(os.path.join(strPathOut, strFleAbl),
                 objBuf.getvalue().encode('utf-8'))
