from .gradcheck import GradCheckReport, gradient_check
from .supervised import (DataSplits, SupervisedLearner, TrainConfig, attach_head, evaluate,
                         fine_tune_full, fit_linear_head, linear_probe, train)
