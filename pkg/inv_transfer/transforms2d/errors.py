class T2DError(Exception):
    """Base class for every error raised by the toolkit."""


class EmptyCatalogError(T2DError):
    pass


class BadParameterError(T2DError, ValueError):
    pass


class FormatError(T2DError):
    pass


class AssetIOError(T2DError, OSError):
    def __init__(self, path, reason):
        super(AssetIOError, self).__init__('{}: {}'.format(path, reason))
        self.path = path


class BadInputError(T2DError, ValueError):
    pass


class DivergenceError(T2DError):
    def __init__(self, epoch, loss):
        super(DivergenceError, self).__init__(
            'non-finite loss {} in epoch {}'.format(loss, epoch))
        self.epoch = epoch
        self.loss = loss


class DegenerateRepresentationError(T2DError):
    def __init__(self, normalizer, eps):
        super(DegenerateRepresentationError, self).__init__(
            'normalizer C={:.3e} below {:.1e}: representation is constant'.format(normalizer, eps))
        self.normalizer = normalizer
