from .linalg import sym, inv_sqrtm, spd_inv

__all__ = ('sym', 'inv_sqrtm', 'spd_inv')
