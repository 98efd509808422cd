//! Per-prefix token bucket, for throttling request floods close to their
//! source. Token accounting is in millionths so refill stays integer-exact.

use crate::name::Name;

#[derive(Debug, Clone)]
pub struct RateLimitConfig {
    pub prefix: Name,
    pub rate_per_s: u64,
    pub burst: u64,
}

#[derive(Debug)]
pub struct RateLimiter {
    cfg: RateLimitConfig,
    /// Available tokens, scaled by 1e6.
    tokens_millionths: u64,
    last_refill_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateDecision {
    Allow,
    Deny,
}

impl RateLimiter {
    pub fn new(cfg: RateLimitConfig) -> Self {
        RateLimiter {
            tokens_millionths: cfg.burst * 1_000_000,
            cfg,
            last_refill_us: 0,
        }
    }

    /// Names outside the configured prefix always pass.
    pub fn check(&mut self, name: &Name, now_us: u64) -> RateDecision {
        if !self.cfg.prefix.is_prefix_of(name) {
            return RateDecision::Allow;
        }
        let elapsed = now_us.saturating_sub(self.last_refill_us);
        self.last_refill_us = now_us;
        let cap = self.cfg.burst * 1_000_000;
        let refill = (self.cfg.rate_per_s as u128 * elapsed as u128) as u64;
        self.tokens_millionths = (self.tokens_millionths + refill).min(cap);
        if self.tokens_millionths >= 1_000_000 {
            self.tokens_millionths -= 1_000_000;
            RateDecision::Allow
        } else {
            RateDecision::Deny
        }
    }
}
