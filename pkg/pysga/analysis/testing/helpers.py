"""Small configs and corpora shared by the tests."""

from pysga.analysis.load_config import load_config
from pysga.analysis.utilities import cls_set_config
from pysga.analysis import synthetic as syn
from pysga.analysis.encoders import prepare_video


# Model dimensions small enough for finite differences:
dicSmall = {'varDimCat': 4, 'varDimProj': 4, 'varDimSem': 2,
            'varDimFfn': 8, 'varDimHid': 8, 'varMaxFrm': 32,
            'varNumCls': 5, 'varNumPrd': 4, 'varSeed': 3, 'varBrwnSeed': 0}


def small_config(**dicOvr):
    """Resolved config dictionary with small dimensions."""
    dicIn = dict(dicSmall)
    dicIn.update(dicOvr)
    return load_config(dicOvr=dicIn, lgcPrint=False)


def small_cfg(**dicOvr):
    """Config namespace with small dimensions."""
    return cls_set_config(small_config(**dicOvr))


def synthetic_videos(strPreset='mixed', varNumVid=4, varSeed=1,
                     tplFrmRng=(6, 8), tplPairRng=(1, 3), varNumCls=5,
                     varNumPrd=4):
    """Synthetic videos of a preset."""
    objCfg = syn.SynthConfig(varNumCls=varNumCls, varNumPrd=varNumPrd,
                             varNumVid=varNumVid, tplFrmRng=tplFrmRng,
                             tplPairRng=tplPairRng,
                             aryTrans=syn.transition_matrix(strPreset,
                                                            varNumPrd))
    return syn.generate_synthetic(objCfg, varSeed)


def video_tensors(**dicKw):
    """Arrays of the first synthetic video."""
    return prepare_video(synthetic_videos(**dicKw)[0])
