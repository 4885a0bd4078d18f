"""
Monitoring and alerting for separation sweeps
"""
import json
import logging
from datetime import datetime
from typing import Dict, List, Optional

from solver_config import GEOMETRY_CONFIG, LOGGING_CONFIG

logger = logging.getLogger(__name__)


def configure_logging(level: int = logging.INFO, log_file: Optional[str] = None):
    """Install the stream handler (and an optional file handler) on the root logger"""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=level, format=LOGGING_CONFIG['format'], handlers=handlers, force=True)


class SweepMonitor:
    """Structured sweep events, alerts and a health summary"""

    def __init__(self):
        self.alerts: List[Dict] = []
        self.rows = 0
        self.converged_rows = 0
        self.cache_hits = 0

    def log_sweep_event(self, event_type: str, data: Dict):
        """Log structured sweep events"""
        event = {
            'timestamp': datetime.now().isoformat(),
            'event_type': event_type,
            'data': data,
        }
        logger.info(f"SWEEP_EVENT: {json.dumps(event, default=str)}")

        if event_type == 'row_completed':
            self.rows += 1
            if data.get('converged', False):
                self.converged_rows += 1
        elif event_type == 'cache_hit':
            self.cache_hits += 1

        self._check_alert_conditions(event_type, data)

    def _check_alert_conditions(self, event_type: str, data: Dict):
        if event_type == 'row_completed':
            d = data.get('d')
            if not data.get('converged', True):
                flags = ', '.join(data.get('flags', [])) or 'unknown'
                self._create_alert('not_converged', f"d={d} nm: row did not converge ({flags})", 'high')

            delta = data.get('delta')
            delta_error = data.get('delta_error')
            if delta and delta_error is not None and abs(delta_error) > LOGGING_CONFIG['richardson_alert_ratio'] * abs(delta):
                self._create_alert('richardson_error',
                                   f"d={d} nm: Richardson error {delta_error:.2e} is large against delta {delta:.3e}",
                                   'medium')

            drift = data.get('gamma_check')
            if drift is not None and drift > 1e-6:
                self._create_alert('gamma_drift', f"d={d} nm: gamma-check drift {drift:.2e}", 'low')

        elif event_type == 'sweep_started':
            ratio = data.get('max_d_over_r')
            if ratio is not None and ratio > GEOMETRY_CONFIG['expansion_warning_ratio']:
                self._create_alert('expansion_validity',
                                   f"d/R reaches {ratio:.3g}; first-order correction may not hold", 'medium')

        elif event_type == 'cache_corrupt':
            self._create_alert('cache_corrupt', f"corrupt cache entry {data.get('key', '?')[:12]} recomputed", 'low')

    def _create_alert(self, alert_type: str, message: str, severity: str):
        alert = {
            'timestamp': datetime.now().isoformat(),
            'type': alert_type,
            'message': message,
            'severity': severity,
        }
        self.alerts.append(alert)
        logger.warning(f"ALERT [{severity.upper()}]: {message}")

        limit = LOGGING_CONFIG['max_alerts']
        if len(self.alerts) > limit:
            self.alerts = self.alerts[-limit:]

    def health_summary(self) -> Dict:
        by_severity: Dict[str, int] = {}
        for alert in self.alerts:
            by_severity[alert['severity']] = by_severity.get(alert['severity'], 0) + 1

        if self.rows and self.converged_rows == 0:
            status = 'failed'
        elif self.converged_rows < self.rows or by_severity.get('high'):
            status = 'degraded'
        else:
            status = 'healthy'

        return {
            'timestamp': datetime.now().isoformat(),
            'overall_status': status,
            'rows': self.rows,
            'converged_rows': self.converged_rows,
            'cache_hits': self.cache_hits,
            'alerts': by_severity,
        }

    def reset(self):
        self.alerts = []
        self.rows = self.converged_rows = self.cache_hits = 0


# Global monitor instance
monitor = None


def get_monitor() -> SweepMonitor:
    global monitor
    if monitor is None:
        monitor = SweepMonitor()
    return monitor
