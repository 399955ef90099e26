# -*- coding: utf-8 -*-
"""Drive synthetic corpus generation, training, evaluation and ablations."""

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
import time

from pysga.analysis.load_config import load_config, write_resolved_config
from pysga.analysis.utilities import cls_set_config, ConfigError
from pysga.analysis.scene_graph import load_corpus, save_corpus
from pysga.analysis.synthetic import (SynthConfig, transition_matrix,
                                      generate_synthetic)
from pysga.analysis.model_creation import strPersistence
from pysga.analysis.checkpoint import load_checkpoint
from pysga.analysis.train_main import train
from pysga.analysis.evaluate_main import (regimes_from_config, evaluate,
                                          write_report, run_ablation,
                                          write_ablation)


# Name of the synthetic corpus if no corpus path is configured:
strFleCrp = 'corpus.json'

# Commands:
lstCommands = ['synth', 'train', 'eval', 'ablate']


def _corpus(cfg):
    """Load the configured corpus."""
    if not cfg.strPathCorpus:
        raise ConfigError('Parameter strPathCorpus: no corpus given.')
    print('------Load corpus ' + cfg.strPathCorpus)
    lstVid = load_corpus(cfg.strPathCorpus)
    print('---------Number of videos (>= 3 frames): ' + str(len(lstVid)))
    return lstVid


def run_synth(dicCnfg):
    """
    Generate a synthetic corpus.

    Returns
    -------
    strPath : str
        Path of the corpus file (`strPathCorpus`, or `corpus.json` in the
        output directory).
    """
    cfg = cls_set_config(dicCnfg)
    print('------Generate synthetic corpus (' + cfg.strSynthPreset + ')')
    aryTrans = transition_matrix(cfg.strSynthPreset, cfg.varNumPrd)
    objSyn = SynthConfig(varNumCls=cfg.varNumCls, varNumPrd=cfg.varNumPrd,
                         varNumVid=cfg.varSynthVideos,
                         tplFrmRng=(cfg.varFrmMin, cfg.varFrmMax),
                         tplPairRng=(cfg.varPairMin, cfg.varPairMax),
                         aryTrans=aryTrans)
    lstVid = generate_synthetic(objSyn, cfg.varSeed)

    strPath = cfg.strPathCorpus
    if not strPath:
        strPath = os.path.join(cfg.strPathOut, strFleCrp)
    strDirCrp = os.path.dirname(os.path.abspath(strPath))
    if not os.path.isdir(strDirCrp):
        os.makedirs(strDirCrp)
    print('---------Write ' + str(len(lstVid)) + ' videos to ' + strPath)
    save_corpus(lstVid, strPath, objTax=lstVid[0].taxonomy if lstVid else None,
                dicExtra={'transition_matrix': aryTrans.tolist()})
    return strPath


def run_train(dicCnfg):
    """Train a model; returns the checkpoint path."""
    cfg = cls_set_config(dicCnfg)
    if cfg.strModel == strPersistence:
        raise ConfigError('Parameter strModel: the persistence model has no '
                          + 'parameters to train.')
    lstVid = _corpus(cfg)
    return train(lstVid, dicCnfg, cfg.strPathOut)


def run_eval(dicCnfg):
    """Evaluate a checkpoint (or the persistence model); returns the report."""
    cfg = cls_set_config(dicCnfg)
    lstRgm = regimes_from_config(cfg)
    if cfg.strPathCkpt:
        print('------Load checkpoint ' + cfg.strPathCkpt)
        objCkpt = load_checkpoint(cfg.strPathCkpt)
    elif cfg.strModel == strPersistence:
        objCkpt = None
    else:
        raise ConfigError('Parameter strPathCkpt: no checkpoint given.')
    lstVid = _corpus(cfg)
    objRpt = evaluate(objCkpt, lstVid, lstRgm, dicCnfg)
    write_report(objRpt, cfg.strPathOut)
    return objRpt


def run_ablate(dicCnfg):
    """Compare several checkpoints; returns header and rows of the table."""
    cfg = cls_set_config(dicCnfg)
    lstRgm = regimes_from_config(cfg)
    lstCkpt = []
    for strPath in cfg.lstPathCkpt:
        print('------Load checkpoint ' + strPath)
        lstCkpt.append(load_checkpoint(strPath))
    lstVid = _corpus(cfg)
    lstHdr, lstRow, _ = run_ablation(lstCkpt, lstVid, lstRgm, dicCnfg)
    write_ablation(lstHdr, lstRow, cfg.strPathOut)
    return lstHdr, lstRow


def pysga(strCmd, strPathCfg=None, dicOvr=None):
    """
    Main function of pysga.

    Parameters
    ----------
    strCmd : str
        One of 'synth', 'train', 'eval', 'ablate'.
    strPathCfg : str or None
        Path of the config file.
    dicOvr : dict or None
        Parameters set on the command line.

    Returns
    -------
    objRes
        Result of the command (corpus path, checkpoint path, report, or
        ablation table).
    """
    # *************************************************************************
    # *** Check time
    print('---pysga ' + strCmd)
    varTme01 = time.time()
    # *************************************************************************

    # *************************************************************************
    # *** Preparations

    if strCmd not in lstCommands:
        raise ConfigError('Unknown command: ' + str(strCmd))

    dicCnfg = load_config(strPathCfg, dicOvr=dicOvr)
    cfg = cls_set_config(dicCnfg)

    # The resolved config is written before any work starts:
    write_resolved_config(dicCnfg, cfg.strPathOut)
    # *************************************************************************

    # *************************************************************************
    # *** Run command

    if strCmd == 'synth':
        objRes = run_synth(dicCnfg)
    elif strCmd == 'train':
        objRes = run_train(dicCnfg)
    elif strCmd == 'eval':
        objRes = run_eval(dicCnfg)
    else:
        objRes = run_ablate(dicCnfg)
    # *************************************************************************

    # *************************************************************************
    # *** Report time

    varTme02 = time.time()
    varTme03 = varTme02 - varTme01
    print('---Elapsed time: ' + str(varTme03) + ' s')
    print('---Done.')
    # *************************************************************************

    return objRes
