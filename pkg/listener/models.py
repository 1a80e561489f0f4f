from dataclasses import dataclass

import numpy as np
from django.db import models

from gridworld.models import Action, ACTIONS


class Arm(models.TextChoices):
    PUSH = 'push', 'Sub-policy A（push）'
    PULL = 'pull', 'Sub-policy B（pull）'
    NULL = 'null', 'Null（只導航）'


ARMS = tuple(Arm)

_MOVEMENT = (Action.LEFT, Action.RIGHT, Action.FORWARD, Action.BACKWARD)

# 每個 arm 的動作空間：四個移動加上一個互動動作
ARM_ACTIONS = {
    Arm.PUSH: _MOVEMENT + (Action.PUSH,),
    Arm.PULL: _MOVEMENT + (Action.PULL,),
    Arm.NULL: _MOVEMENT + (Action.NOOP,),
}
ARM_ACTION_COUNT = len(_MOVEMENT) + 1

ACTION_INDEX = {action: index for index, action in enumerate(ACTIONS)}

# (arm, 區域動作) → 全域 primitive action index
ARM_TO_PRIMITIVE = np.array([[ACTION_INDEX[action] for action in ARM_ACTIONS[arm]] for arm in ARMS])


@dataclass
class AttentionOutput:
    weights: np.ndarray
    attended: np.ndarray


@dataclass
class PolicyOutput:
    master: np.ndarray
    arm: Arm
    arm_index: int
    master_log_prob: float
    action: np.ndarray
    local_action: int
    action_log_prob: float
    attention: np.ndarray

    @property
    def primitive(self) -> Action:
        return ARM_ACTIONS[self.arm][self.local_action]
