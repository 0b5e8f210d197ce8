class KernelConditionWarning(Warning):
    pass


class UnprovenRegimeWarning(Warning):
    pass


class ScenarioParseWarning(Warning):
    pass


class StatisticalSlackWarning(Warning):
    pass
