//! Request pacing: a token bucket for requests per minute plus a cap on
//! concurrent in-flight requests.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LimiterConfig {
    /// `None` disables the per-minute budget.
    pub requests_per_minute: Option<u32>,
    pub max_in_flight: usize,
}

impl Default for LimiterConfig {
    fn default() -> Self {
        Self {
            requests_per_minute: None,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug)]
struct Bucket {
    tokens: f64,
    capacity: f64,
    per_sec: f64,
    last: Instant,
}

impl Bucket {
    fn refill(&mut self, now: Instant) {
        let elapsed = now.saturating_duration_since(self.last).as_secs_f64();
        self.tokens = (self.tokens + elapsed * self.per_sec).min(self.capacity);
        self.last = now;
    }
}

#[derive(Debug)]
pub struct RateLimiter {
    bucket: Option<Mutex<Bucket>>,
    in_flight: Mutex<usize>,
    released: Condvar,
    max_in_flight: usize,
}

/// Held while a request is in flight.
pub struct Permit<'a> {
    limiter: &'a RateLimiter,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.limiter.in_flight.lock().expect("limiter lock");
        *n -= 1;
        self.limiter.released.notify_one();
    }
}

impl RateLimiter {
    pub fn new(config: LimiterConfig) -> Self {
        let bucket = config.requests_per_minute.filter(|&r| r > 0).map(|rpm| {
            Mutex::new(Bucket {
                tokens: rpm as f64,
                capacity: rpm as f64,
                per_sec: rpm as f64 / 60.0,
                last: Instant::now(),
            })
        });
        Self {
            bucket,
            in_flight: Mutex::new(0),
            released: Condvar::new(),
            max_in_flight: config.max_in_flight.max(1),
        }
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().expect("limiter lock")
    }

    /// Block until both a token and an in-flight slot are available.
    pub fn acquire(&self) -> Permit<'_> {
        if let Some(bucket) = &self.bucket {
            loop {
                let wait = {
                    let mut b = bucket.lock().expect("limiter lock");
                    b.refill(Instant::now());
                    if b.tokens >= 1.0 {
                        b.tokens -= 1.0;
                        None
                    } else {
                        Some(Duration::from_secs_f64((1.0 - b.tokens) / b.per_sec))
                    }
                };
                match wait {
                    None => break,
                    Some(d) => std::thread::sleep(d),
                }
            }
        }
        let mut n = self.in_flight.lock().expect("limiter lock");
        while *n >= self.max_in_flight {
            n = self.released.wait(n).expect("limiter lock");
        }
        *n += 1;
        Permit { limiter: self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn caps_concurrency() {
        let limiter = Arc::new(RateLimiter::new(LimiterConfig {
            requests_per_minute: None,
            max_in_flight: 2,
        }));
        let peak = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let limiter = Arc::clone(&limiter);
                let peak = Arc::clone(&peak);
                std::thread::spawn(move || {
                    let _permit = limiter.acquire();
                    peak.fetch_max(limiter.in_flight(), Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(limiter.in_flight(), 0);
    }

    #[test]
    fn bucket_paces_requests() {
        // 600/min = one token per 100 ms after the initial burst of 600
        let limiter = RateLimiter::new(LimiterConfig {
            requests_per_minute: Some(600),
            max_in_flight: 1,
        });
        {
            let mut b = limiter.bucket.as_ref().unwrap().lock().unwrap();
            b.tokens = 0.0;
            b.last = Instant::now();
        }
        let start = Instant::now();
        drop(limiter.acquire());
        drop(limiter.acquire());
        assert!(start.elapsed() >= Duration::from_millis(150));
    }
}
