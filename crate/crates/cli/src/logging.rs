//! Minimal stderr logger controlled by `RELU_SCULPT_LOG` (error, info,
//! debug; default info).

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Error = 0,
    Info = 1,
    Debug = 2,
}

static LEVEL: OnceLock<Level> = OnceLock::new();

pub fn level() -> Level {
    *LEVEL.get_or_init(|| match std::env::var("RELU_SCULPT_LOG").as_deref() {
        Ok("error") => Level::Error,
        Ok("debug") => Level::Debug,
        _ => Level::Info,
    })
}

pub fn info(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("[info] {}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if level() >= Level::Debug {
        eprintln!("[debug] {}", msg.as_ref());
    }
}

pub fn error(msg: impl AsRef<str>) {
    eprintln!("[error] {}", msg.as_ref());
}
