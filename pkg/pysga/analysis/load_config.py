# -*- coding: utf-8 -*-
"""Load pysga config file."""

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
import sys
import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from pysga.analysis.utilities import ConfigError, write_atomic
from pysga.analysis.synthetic import lstPresets
from pysga.analysis.latent_dynamics import (SolverSpec, lstOdeMethods,
                                            lstSdeMethods)
from pysga.analysis.heads_losses import dicDefLmb, dicAblate
from pysga.analysis.model_creation import lstModels, strPersistence

# Get path of this file:
strDir = os.path.dirname(os.path.abspath(__file__))

# Environment variable used as seed fallback:
strEnvSeed = 'SGA_SEED'

# Name of the resolved config written next to the outputs:
strFleRes = 'resolved_config.toml'

# Default solver per model (baselines do not integrate, the entry is unused):
dicDefSolver = {'scenesayer_ode': 'adams_bashforth4',
                'scenesayer_sde': 'reversible_heun_stratonovich',
                'baseline_plus': 'euler',
                'baseline_plus_plus': 'euler',
                strPersistence: 'euler'}

# Parameters: key, type, default, description. Defaults of None are resolved
# per model (solver, loss weights).
lstParams = [
    # Input and output
    ('strModel', str, 'scenesayer_sde', 'Model'),
    ('strPathCorpus', str, '', 'Path of corpus file'),
    ('strPathOut', str, 'out', 'Output directory'),
    ('strPathCkpt', str, '', 'Path of checkpoint file'),
    ('lstPathCkpt', list, [], 'Paths of checkpoints to compare'),
    # Synthetic corpus
    ('strSynthPreset', str, 'mixed', 'Synthetic dynamics preset'),
    ('varSynthVideos', int, 200, 'Number of synthetic videos'),
    ('varNumCls', int, 8, 'Number of object categories'),
    ('varNumPrd', int, 10, 'Number of predicate classes'),
    ('varFrmMin', int, 8, 'Minimum number of frames per video'),
    ('varFrmMax', int, 16, 'Maximum number of frames per video'),
    ('varPairMin', int, 1, 'Minimum number of pairs per video'),
    ('varPairMax', int, 4, 'Maximum number of pairs per video'),
    # Model dimensions
    ('varDimCat', int, 24, 'Category embedding dimension'),
    ('varDimProj', int, 32, 'Object projection dimension'),
    ('varDimSem', int, 16, 'Semantic embedding dimension'),
    ('varNumLyr', int, 1, 'Number of attention layers per encoder'),
    ('varNumHead', int, 1, 'Number of attention heads'),
    ('varDimFfn', int, 64, 'Feed-forward dimension'),
    ('varDimHid', int, 128, 'Hidden dimension of vector fields and heads'),
    ('varMaxFrm', int, 128, 'Maximum number of frames per video'),
    # Latent dynamics
    ('strSolver', str, None, 'Solver'),
    ('varStepSize', float, 0.04, 'Solver step size [frames]'),
    # Training
    ('lstLambda', list, None, 'Loss weights (gen, object, ant, boxes, recon)'),
    ('strLossAblate', str, '', 'Loss term switched off'),
    ('lgcBoxActOnly', bool, False, 'Decode actor box only'),
    ('varTrnHrz', int, 3, 'Training anticipation horizon'),
    ('varEpochs', int, 20, 'Number of epochs'),
    ('varLr', float, 1e-4, 'Learning rate'),
    ('varBeta1', float, 0.9, 'Adam beta 1'),
    ('varBeta2', float, 0.999, 'Adam beta 2'),
    ('varEps', float, 1e-8, 'Adam epsilon'),
    ('varSeed', int, 7, 'Seed'),
    ('lgcTchFrc', bool, True, 'Teacher forcing of baselines'),
    ('lgcResume', bool, False, 'Resume from checkpoint'),
    # Evaluation
    ('varBrwnSeed', int, 0, 'Brownian seed for evaluation'),
    ('lgcCntMis', bool, False, 'Count future-only objects as missed'),
    ('varActorCat', int, 0, 'Actor category'),
    ('varNumSmp', int, 1, 'Number of SDE samples per prediction'),
    ('lstCtxFrc', list, [0.3, 0.5, 0.7, 0.9], 'Context fractions'),
    ('lstFutFrm', list, [1, 2, 3, 4, 5], 'Future frames'),
    ('lstK', list, [10, 20, 50], 'Values of K'),
    ('lstStrategy', list, ['with_constraint', 'no_constraint'],
     'Graph building strategies'),
    ('varPar', int, 1, 'Number of processes'),
    ]


def load_toml(strPathCfg):
    """
    Read a config file.

    Raises
    ------
    OSError
        If the file does not exist.
    ConfigError
        If the file is not valid TOML.
    """
    with open(strPathCfg, 'rb') as fleConfig:
        try:
            return tomllib.load(fleConfig)
        except tomllib.TOMLDecodeError as objExc:
            raise ConfigError('Cannot parse config file ' + str(strPathCfg)
                              + ': ' + str(objExc))


def _convert(strKey, typVal, objVal):
    """Convert one parameter to its type."""
    try:
        if typVal is bool:
            if isinstance(objVal, str):
                if objVal.lower() not in ('true', 'false'):
                    raise ValueError(objVal)
                return objVal.lower() == 'true'
            if not isinstance(objVal, (bool, np.bool_)):
                raise ValueError(objVal)
            return bool(objVal)
        if typVal is int:
            if isinstance(objVal, bool) or float(objVal) != int(objVal):
                raise ValueError(objVal)
            return int(objVal)
        if typVal is float:
            if isinstance(objVal, bool):
                raise ValueError(objVal)
            return float(objVal)
        if typVal is list:
            if isinstance(objVal, str):
                objVal = [strTmp.strip() for strTmp in objVal.split(',')
                          if strTmp.strip()]
            return list(objVal)
        return str(objVal)
    except (TypeError, ValueError):
        raise ConfigError('Parameter ' + strKey + ': cannot convert '
                          + repr(objVal) + ' to ' + typVal.__name__)


def _check(lgcCnd, strKey, strMsg):
    if not lgcCnd:
        raise ConfigError('Parameter ' + strKey + ': ' + strMsg)


def validate_config(dicCnfg):
    """
    Check every parameter against the preconditions of the modules.

    Raises
    ------
    ConfigError
        Naming the first invalid parameter.
    """
    strModel = dicCnfg['strModel']
    _check(strModel in lstModels + [strPersistence], 'strModel',
           'unknown model ' + repr(strModel) + ' (choose from '
           + ', '.join(lstModels + [strPersistence]) + ')')
    _check(dicCnfg['strSynthPreset'] in lstPresets, 'strSynthPreset',
           'unknown preset ' + repr(dicCnfg['strSynthPreset']))

    for strKey in ['varSynthVideos', 'varNumCls', 'varNumPrd', 'varFrmMin',
                   'varPairMin', 'varDimCat', 'varDimProj', 'varDimSem',
                   'varNumLyr', 'varNumHead', 'varDimFfn', 'varDimHid',
                   'varMaxFrm', 'varNumSmp', 'varPar']:
        _check(dicCnfg[strKey] >= 1, strKey, 'must be >= 1')
    for strKey in ['varEpochs', 'varSeed', 'varBrwnSeed', 'varActorCat']:
        _check(dicCnfg[strKey] >= 0, strKey, 'must be >= 0')

    _check(dicCnfg['varNumCls'] >= 2, 'varNumCls',
           'need the actor and at least one object category')
    _check(dicCnfg['varFrmMin'] >= 3, 'varFrmMin', 'videos need >= 3 frames')
    _check(dicCnfg['varFrmMax'] >= dicCnfg['varFrmMin'], 'varFrmMax',
           'must be >= varFrmMin')
    _check(dicCnfg['varFrmMax'] <= dicCnfg['varMaxFrm'], 'varFrmMax',
           'must be <= varMaxFrm')
    _check(dicCnfg['varPairMax'] >= dicCnfg['varPairMin'], 'varPairMax',
           'must be >= varPairMin')
    _check(dicCnfg['varPairMax'] <= dicCnfg['varNumCls'] - 1, 'varPairMax',
           'must be <= varNumCls - 1')
    _check((dicCnfg['varDimCat'] + 8) % dicCnfg['varNumHead'] == 0
           and (3 * dicCnfg['varDimProj'] + 2 * dicCnfg['varDimSem'])
           % dicCnfg['varNumHead'] == 0, 'varNumHead',
           'must divide the object and relationship dimensions')

    # Solver matching the model:
    strSolver = dicCnfg['strSolver']
    _check(strSolver in lstOdeMethods + lstSdeMethods, 'strSolver',
           'unknown solver ' + repr(strSolver))
    try:
        SolverSpec(method=strSolver, h=dicCnfg['varStepSize']).substeps
    except ConfigError as objExc:
        raise ConfigError('Parameter varStepSize: ' + str(objExc))
    if strModel == 'scenesayer_ode':
        _check(strSolver in lstOdeMethods, 'strSolver',
               'scenesayer_ode needs one of ' + ', '.join(lstOdeMethods))
    elif strModel == 'scenesayer_sde':
        _check(strSolver in lstSdeMethods, 'strSolver',
               'scenesayer_sde needs one of ' + ', '.join(lstSdeMethods))
    if strSolver == 'adams_bashforth4':
        _check(dicCnfg['varStepSize'] < 1.0, 'varStepSize',
               'Adams-Bashforth 4 needs step size < 1 frame')

    # Loss weights:
    vecLmb = np.asarray(dicCnfg['lstLambda'], dtype=np.float64)
    _check(vecLmb.shape == (5,), 'lstLambda', 'needs five weights')
    _check(np.all(np.isfinite(vecLmb)) and np.all(vecLmb >= 0.0),
           'lstLambda', 'weights must be finite and nonnegative')
    _check(dicCnfg['strLossAblate'] in [''] + list(dicAblate), 'strLossAblate',
           'choose from ' + ', '.join(dicAblate))
    _check(dicCnfg['varTrnHrz'] in (1, 3, 5), 'varTrnHrz',
           'training horizon must be 1, 3 or 5')

    _check(dicCnfg['varLr'] > 0.0, 'varLr', 'must be positive')
    _check(0.0 <= dicCnfg['varBeta1'] < 1.0, 'varBeta1', 'must lie in [0, 1)')
    _check(0.0 <= dicCnfg['varBeta2'] < 1.0, 'varBeta2', 'must lie in [0, 1)')
    _check(dicCnfg['varEps'] > 0.0, 'varEps', 'must be positive')

    # Evaluation regimes:
    for varFrc in dicCnfg['lstCtxFrc']:
        _check(0.0 < varFrc <= 1.0, 'lstCtxFrc',
               'context fractions must lie in (0, 1]')
    for varHrz in dicCnfg['lstFutFrm']:
        _check(varHrz >= 1, 'lstFutFrm', 'future frames must be >= 1')
    _check(len(dicCnfg['lstK']) > 0, 'lstK', 'needs at least one K')
    for varK in dicCnfg['lstK']:
        _check(varK >= 1, 'lstK', 'K must be >= 1')
    _check(len(dicCnfg['lstStrategy']) > 0, 'lstStrategy',
           'needs at least one strategy')
    for strStr in dicCnfg['lstStrategy']:
        _check(strStr in ('with_constraint', 'no_constraint'), 'lstStrategy',
               'unknown strategy ' + repr(strStr))


def load_config(strPathCfg=None, dicOvr=None, lgcPrint=True):
    """
    Load pysga config file.

    Parameters
    ----------
    strPathCfg : str or None
        Path of a TOML config file (`key = value` lines); None uses the
        defaults only.
    dicOvr : dict or None
        Parameters set on the command line; they take precedence over the
        file.
    lgcPrint : bool
        Whether to print the parameters.

    Returns
    -------
    dicCnfg : dict
        Dictionary containing parameter names (as keys) and parameter values
        (as values). For example, `dicCnfg['varEpochs']` contains an int, such
        as `20`. Every parameter is present.

    Notes
    -----
    Precedence: command line > config file > environment variable `SGA_SEED`
    (seeds only) > defaults.
    """
    dicCnfg = {}
    if strPathCfg is not None:
        dicCnfg.update(load_toml(strPathCfg))
    if dicOvr is not None:
        dicCnfg.update({strKey: objVal for strKey, objVal in dicOvr.items()
                        if objVal is not None})

    setKnw = set(tplPrm[0] for tplPrm in lstParams)
    for strKey in sorted(dicCnfg):
        if strKey not in setKnw:
            raise ConfigError('Unknown parameter: ' + strKey)

    # Seed fallback from the environment:
    if strEnvSeed in os.environ:
        for strKey in ['varSeed', 'varBrwnSeed']:
            if strKey not in dicCnfg:
                dicCnfg[strKey] = os.environ[strEnvSeed]

    for strKey, typVal, objDef, _ in lstParams:
        if strKey in dicCnfg:
            dicCnfg[strKey] = _convert(strKey, typVal, dicCnfg[strKey])
        elif objDef is not None:
            dicCnfg[strKey] = objDef

    # Defaults that depend on the model:
    strModel = dicCnfg['strModel'].replace('-', '_')
    dicCnfg['strModel'] = strModel
    if 'strSolver' not in dicCnfg:
        dicCnfg['strSolver'] = dicDefSolver.get(strModel, 'euler')
    if 'lstLambda' not in dicCnfg:
        dicCnfg['lstLambda'] = list(dicDefLmb.get(strModel,
                                                  dicDefLmb['scenesayer_sde']))

    # Element types of lists:
    for strKey, typVal in [('lstLambda', float), ('lstCtxFrc', float),
                           ('lstFutFrm', int), ('lstK', int),
                           ('lstStrategy', str), ('lstPathCkpt', str)]:
        try:
            dicCnfg[strKey] = [typVal(objTmp) for objTmp in dicCnfg[strKey]]
        except (TypeError, ValueError) as objExc:
            raise ConfigError('Parameter ' + strKey + ': invalid entry ('
                              + str(objExc) + ')')

    validate_config(dicCnfg)

    if lgcPrint:
        for strKey, _, _, strDsc in lstParams:
            print('---' + strDsc + ': ' + str(dicCnfg[strKey]))

    return {strKey: dicCnfg[strKey] for strKey in sorted(dicCnfg)}


def write_resolved_config(dicCnfg, strPathOut):
    """
    Write the fully resolved config as TOML next to the outputs.

    Returns
    -------
    strPath : str
        Path of `resolved_config.toml`.
    """
    if not os.path.isdir(strPathOut):
        os.makedirs(strPathOut)
    strPath = os.path.join(strPathOut, strFleRes)
    write_atomic(strPath, tomli_w.dumps(dicCnfg).encode('utf-8'))
    return strPath
