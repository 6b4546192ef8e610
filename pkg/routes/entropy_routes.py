from flask import request
from flask_restful import Resource
from core.entropy import mutual_information_report, relative_entropy, von_neumann_entropy
from core.errors import ManifestError
from core.operators import SUPPORT_RTOL, SystemLayout
from database.state_files import state_from_json
import logging
import math

logger = logging.getLogger(__name__)


def json_number(value):
    """Floats rounded to 6 decimals, or the string "inf"."""
    if math.isinf(value):
        return 'inf'
    return round(float(value), 6)


def state_from_body(data, key):
    obj = data.get(key)
    if obj is None:
        raise ManifestError(f"'{key}' is required")
    return state_from_json(obj).to_density()


class EntropyResource(Resource):
    def post(self):
        try:
            data = request.get_json(silent=True)
            if not data:
                return {'success': False, 'message': 'No data provided'}, 400

            rho = state_from_body(data, 'state')
            logger.info(f"Entropy POST - layout {rho.layout}")
            return {'success': True, 'entropy': json_number(von_neumann_entropy(rho))}, 200

        except ValueError as e:
            return {'success': False, 'message': str(e)}, 400
        except Exception as e:
            logger.exception(f"Error in entropy POST: {e}")
            return {'success': False, 'message': 'Server error'}, 500


class RelativeEntropyResource(Resource):
    def post(self):
        try:
            data = request.get_json(silent=True)
            if not data:
                return {'success': False, 'message': 'No data provided'}, 400

            rho = state_from_body(data, 'rho')
            sigma = state_from_body(data, 'sigma')
            tol = float(data.get('tol', SUPPORT_RTOL))
            if tol <= 0:
                return {'success': False, 'message': 'Tolerance must be positive'}, 400

            logger.info(f"Relative entropy POST - layouts {rho.layout} / {sigma.layout}, tol={tol}")
            value = relative_entropy(rho, sigma, tol)
            return {'success': True, 'relative_entropy': json_number(value)}, 200

        except ValueError as e:
            return {'success': False, 'message': str(e)}, 400
        except Exception as e:
            logger.exception(f"Error in relative entropy POST: {e}")
            return {'success': False, 'message': 'Server error'}, 500


class MutualInformationResource(Resource):
    def post(self):
        try:
            data = request.get_json(silent=True)
            if not data:
                return {'success': False, 'message': 'No data provided'}, 400

            rho = state_from_body(data, 'state')
            if data.get('dims'):
                rho = rho.relabel(SystemLayout.parse(data['dims']))

            logger.info(f"Mutual information POST - layout {rho.layout}")
            report = mutual_information_report(rho)
            return {
                'success': True,
                'mutual_information': json_number(report.via_divergence),
                'discrepancy': report.discrepancy
            }, 200

        except ValueError as e:
            return {'success': False, 'message': str(e)}, 400
        except Exception as e:
            logger.exception(f"Error in mutual information POST: {e}")
            return {'success': False, 'message': 'Server error'}, 500
