//! The `channelctl` operator tool: stream a file to a channel endpoint,
//! receive streams to disk, or run an echo server — over any channel
//! type, using only the public handler interface.
//!
//! Exit codes: 0 success, 1 setup failure, 2 transfer failure.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use chanplat_core::{
    options, ChannelId, ChannelInfo, ChannelType, Endpoint, Message, MessageKind, Status,
};

use crate::handler::ChannelHandler;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SETUP: i32 = 1;
pub const EXIT_TRANSFER: i32 = 2;

/// Inter-chunk delay for datagram sends. UDP has no backpressure, so
/// the sender self-paces to keep loopback receive buffers from
/// overflowing.
const UDP_PACE: Duration = Duration::from_micros(500);
const QUEUE_POLL: Duration = Duration::from_micros(200);

#[derive(Parser, Debug)]
#[command(name = "channelctl", version, about = "Stream bytes over pluggable channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Stream a file to a remote endpoint over a client channel.
    Send(SendArgs),
    /// Accept streams and write one output file per connection.
    Serve(ServeArgs),
    /// Bounce every received payload back to its sender.
    Echo(EchoArgs),
}

#[derive(Args, Debug)]
pub struct CommonArgs {
    /// Channel type token (tcp-client, udp-server, soap-client, ...).
    #[arg(long = "type", value_name = "TOKEN")]
    pub channel_type: String,

    /// Endpoint as host:port — connect address for clients, bind
    /// address for servers.
    #[arg(long, value_name = "HOST:PORT")]
    pub addr: String,

    /// Channel option as key=value; repeatable.
    #[arg(long = "opt", value_name = "KEY=VALUE")]
    pub options: Vec<String>,

    /// Log filter when CHANNELCTL_LOG is not set.
    #[arg(long, default_value = "warn")]
    pub log: String,
}

#[derive(Args, Debug)]
pub struct SendArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// File to stream.
    #[arg(long, value_name = "PATH")]
    pub file: PathBuf,

    /// Bytes per message.
    #[arg(long, default_value_t = 16384)]
    pub chunk: usize,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Directory for received streams, one <channel-id>.bin each.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EchoArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

static STOP: AtomicBool = AtomicBool::new(false);

extern "C" fn on_stop_signal(_signal: libc::c_int) {
    STOP.store(true, Ordering::SeqCst);
}

/// Routes SIGINT/SIGTERM to a stop flag so serve/echo can exit cleanly.
pub fn install_stop_handler() {
    unsafe {
        let handler = on_stop_signal as extern "C" fn(libc::c_int) as *const () as libc::sighandler_t;
        libc::signal(libc::SIGINT, handler);
        libc::signal(libc::SIGTERM, handler);
    }
}

fn stop_requested() -> bool {
    STOP.load(Ordering::SeqCst)
}

fn build_info(common: &CommonArgs, want_server: bool) -> Result<ChannelInfo, String> {
    let channel_type: ChannelType = common
        .channel_type
        .parse()
        .map_err(|s: Status| format!("bad channel type: {s}"))?;
    if want_server && !channel_type.is_server() {
        return Err(format!(
            "{} is not a server channel type",
            channel_type.name()
        ));
    }
    if !want_server && !channel_type.is_client() {
        return Err(format!(
            "{} is not a client channel type",
            channel_type.name()
        ));
    }
    let endpoint =
        Endpoint::parse(&common.addr).map_err(|s| format!("bad --addr {:?}: {s}", common.addr))?;
    let mut info = ChannelInfo::new(channel_type, endpoint);
    for pair in &common.options {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| format!("bad --opt {pair:?}, expected key=value"))?;
        info.set_option(key, value);
    }
    info.validate()
        .map_err(|s| format!("bad channel options: {s}"))?;
    Ok(info)
}

/// Polls notifications, failing on a disconnect or error for `id`.
fn check_channel_alive(handler: &ChannelHandler, id: ChannelId) -> Result<(), String> {
    while let Ok(Some(msg)) = handler.get_message() {
        if msg.channel_id != id {
            continue;
        }
        match msg.kind {
            MessageKind::Disconnected => return Err("channel disconnected mid-stream".into()),
            MessageKind::Error => {
                let status = msg.status.unwrap_or(Status::SOCKET_ERR);
                return Err(format!("channel error mid-stream: {status}"));
            }
            _ => {}
        }
    }
    Ok(())
}

pub fn run_send(args: &SendArgs) -> i32 {
    let info = match build_info(&args.common, false) {
        Ok(info) => info,
        Err(e) => {
            eprintln!("channelctl send: {e}");
            return EXIT_SETUP;
        }
    };
    // Open the input before touching the network; a missing file must
    // not create a channel.
    let mut file = match File::open(&args.file) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("channelctl send: cannot open {}: {e}", args.file.display());
            return EXIT_SETUP;
        }
    };
    if args.chunk == 0 {
        eprintln!("channelctl send: --chunk must be at least 1");
        return EXIT_SETUP;
    }
    let pace_udp = info.channel_type == ChannelType::UdpClient;

    let handler = ChannelHandler::new();
    let id = match handler.create_channel(&info) {
        Ok(id) => id,
        Err(status) => {
            eprintln!("channelctl send: channel creation failed: {status}");
            return EXIT_SETUP;
        }
    };

    let started = Instant::now();
    let mut sent: u64 = 0;
    let mut buf = vec![0u8; args.chunk];
    let failed = |e: String| {
        eprintln!("channelctl send: {e}");
        EXIT_TRANSFER
    };
    loop {
        let n = match file.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => n,
            Err(e) => return failed(format!("read failed: {e}")),
        };
        // Pace against the bounded queue instead of dropping: wait for
        // room before enqueueing.
        loop {
            if let Err(e) = check_channel_alive(&handler, id) {
                return failed(e);
            }
            match handler.channel_stats(id) {
                Ok(stats) if stats.pending < stats.capacity => break,
                Ok(_) => std::thread::sleep(QUEUE_POLL),
                Err(_) => return failed("channel vanished mid-stream".into()),
            }
        }
        if let Err(status) = handler.send_to_channel(Message::data(id, buf[..n].to_vec())) {
            return failed(format!("send failed: {status}"));
        }
        sent += n as u64;
        if pace_udp {
            std::thread::sleep(UDP_PACE);
        }
    }
    // Drain: every queued payload on the wire before the channel goes.
    loop {
        if let Err(e) = check_channel_alive(&handler, id) {
            return failed(e);
        }
        match handler.channel_stats(id) {
            Ok(stats) if stats.pending == 0 => {
                if stats.dropped > 0 {
                    return failed(format!("{} payloads dropped", stats.dropped));
                }
                break;
            }
            Ok(_) => std::thread::sleep(Duration::from_millis(1)),
            Err(_) => return failed("channel vanished mid-stream".into()),
        }
    }
    if let Err(e) = check_channel_alive(&handler, id) {
        return failed(e);
    }
    let elapsed = started.elapsed();
    let _ = handler.destroy_channel(id);
    let _ = handler.shutdown();
    println!(
        "sent {} bytes in {:.3} s ({:.1} KiB/s)",
        sent,
        elapsed.as_secs_f64(),
        sent as f64 / 1024.0 / elapsed.as_secs_f64().max(1e-9),
    );
    EXIT_OK
}

pub fn run_serve(args: &ServeArgs) -> i32 {
    let mut info = match build_info(&args.common, true) {
        Ok(info) => info,
        Err(e) => {
            eprintln!("channelctl serve: {e}");
            return EXIT_SETUP;
        }
    };
    // serve never queues replies, so SOAP responses should not wait for
    // one; the option stays overridable.
    if info.channel_type == ChannelType::SoapServer && !info.has_option(options::SOAP_REPLY_WAIT) {
        info.set_option(options::SOAP_REPLY_WAIT, "0");
    }
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("channelctl serve: cannot create {}: {e}", args.out.display());
        return EXIT_SETUP;
    }

    let handler = ChannelHandler::new();
    if let Err(status) = handler.create_channel(&info) {
        eprintln!("channelctl serve: channel creation failed: {status}");
        return EXIT_SETUP;
    }
    install_stop_handler();
    log::info!("serving on {} as {}", info.endpoint, info.channel_type);

    let mut outputs: HashMap<u64, (BufWriter<File>, u64)> = HashMap::new();
    while !stop_requested() {
        let msg = match handler.wait_message(Duration::from_millis(100)) {
            Ok(Some(msg)) => msg,
            Ok(None) => continue,
            Err(_) => break,
        };
        let key = msg.channel_id.get();
        match msg.kind {
            MessageKind::Connected => {
                let path = args.out.join(format!("{}.bin", msg.channel_id));
                match File::create(&path) {
                    Ok(f) => {
                        log::info!(
                            "channel {} connected from {}",
                            msg.channel_id,
                            msg.remote.map(|r| r.to_string()).unwrap_or_default()
                        );
                        outputs.insert(key, (BufWriter::new(f), 0));
                    }
                    Err(e) => log::warn!("cannot create {}: {e}", path.display()),
                }
            }
            MessageKind::Data => {
                if let Some((file, written)) = outputs.get_mut(&key) {
                    if let Err(e) = file.write_all(&msg.payload) {
                        log::warn!("write failed for channel {key}: {e}");
                    } else {
                        *written += msg.payload.len() as u64;
                        if let Err(e) = file.flush() {
                            log::warn!("flush failed for channel {key}: {e}");
                        }
                    }
                }
            }
            MessageKind::Disconnected => {
                if let Some((mut file, written)) = outputs.remove(&key) {
                    let _ = file.flush();
                    println!("channel {key}: {written} bytes received");
                }
            }
            MessageKind::Error => {
                log::warn!(
                    "channel {key} error: {}",
                    msg.status.unwrap_or(Status::SOCKET_ERR)
                );
            }
        }
    }
    for (key, (mut file, written)) in outputs {
        let _ = file.flush();
        println!("channel {key}: {written} bytes received");
    }
    let _ = handler.shutdown();
    EXIT_OK
}

pub fn run_echo(args: &EchoArgs) -> i32 {
    let info = match build_info(&args.common, true) {
        Ok(info) => info,
        Err(e) => {
            eprintln!("channelctl echo: {e}");
            return EXIT_SETUP;
        }
    };
    let handler = ChannelHandler::new();
    if let Err(status) = handler.create_channel(&info) {
        eprintln!("channelctl echo: channel creation failed: {status}");
        return EXIT_SETUP;
    }
    install_stop_handler();
    log::info!("echoing on {} as {}", info.endpoint, info.channel_type);

    while !stop_requested() {
        let msg = match handler.wait_message(Duration::from_millis(100)) {
            Ok(Some(msg)) => msg,
            Ok(None) => continue,
            Err(_) => break,
        };
        if msg.kind == MessageKind::Data {
            // The child may be gone already; nothing to do about it.
            let _ = handler.send_to_channel(Message::data(msg.channel_id, msg.payload));
        }
    }
    let _ = handler.shutdown();
    EXIT_OK
}
