//! Acceptance suite. Each test prints one PASS/FAIL line; the whole
//! suite is the release gate for the platform:
//!
//!  1. SPI conformance across all six built-in channel types
//!  2. Handler queue conservation under 8 concurrent producers
//!  3. TCP byte conservation, 10 MiB through the channelctl binaries
//!  4. UDP demultiplexing of a scripted multi-source datagram sequence
//!  5. UDP idle expiry (deterministic clock + live socket)
//!  6. SOAP envelope golden bytes and element tree
//!  7. SOAP round-trip property and base64 reference agreement
//!  8. HTTP parser split-invariance, exhaustive over 2-way splits
//!  9. Transport swap: identical invocations, tcp/udp/soap checksums
//! 10. Non-blocking add_message latency and drop arithmetic

mod common;

use std::collections::HashMap;
use std::net::{TcpListener, UdpSocket};
use std::panic::catch_unwind;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use base64::Engine as _;
use rand::{Rng, RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use chanplat::{
    builtin_registry, options, Channel, ChannelCallback, ChannelFactory, ChannelHandler,
    ChannelHost, ChannelId, ChannelInfo, ChannelStats, ChannelType, Endpoint, Message,
    MessageKind, Status,
};
use chanplat_core::http::{frame_request, HttpParser};
use chanplat_core::peer::{PeerLookup, PeerTable};
use chanplat_core::{base64 as b64, soap};

use common::{await_kind, free_tcp_port, free_udp_port, info, local};

fn criterion(number: u32, name: &str, f: impl FnOnce() + std::panic::UnwindSafe) {
    let result = catch_unwind(f);
    let verdict = if result.is_ok() { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number:>2} {name}: {verdict}");
    if let Err(cause) = result {
        std::panic::resume_unwind(cause);
    }
}

// --- 1. SPI conformance ---------------------------------------------------

struct NullHost {
    next: AtomicU64,
}

impl ChannelCallback for NullHost {
    fn on_channel_message(&self, _msg: Message) -> Status {
        Status::OK
    }
}

impl ChannelHost for NullHost {
    fn allocate_id(&self) -> ChannelId {
        ChannelId::new(self.next.fetch_add(1, Ordering::SeqCst)).unwrap()
    }
    fn adopt_child(&self, _id: ChannelId, _child: Arc<dyn Channel>) -> Status {
        Status::OK
    }
    fn release_child(&self, _id: ChannelId) {}
}

#[test]
fn acceptance_01_spi_conformance() {
    criterion(1, "SPI conformance across six channel types", || {
        let started = Instant::now();
        let registry = builtin_registry();
        let host: Arc<dyn ChannelHost> = Arc::new(NullHost {
            next: AtomicU64::new(1),
        });

        // Hold listeners open so the client-flavored types can connect.
        let tcp_peer_port = free_tcp_port();
        let soap_peer_port = free_tcp_port();
        let _tcp_peer = TcpListener::bind(("127.0.0.1", tcp_peer_port)).unwrap();
        let _soap_peer = TcpListener::bind(("127.0.0.1", soap_peer_port)).unwrap();

        let cases = vec![
            info(ChannelType::TcpServer, free_tcp_port()),
            info(ChannelType::TcpClient, tcp_peer_port),
            info(ChannelType::UdpServer, free_udp_port()),
            info(ChannelType::UdpClient, free_udp_port()),
            info(ChannelType::SoapServer, free_tcp_port()),
            info(ChannelType::SoapClient, soap_peer_port),
        ];
        for case in cases {
            let label = case.channel_type.name().to_string();
            let id = host.allocate_id();
            let channel = registry.build(&case, id, Arc::clone(&host)).unwrap();

            assert_eq!(channel.status(), Status::CLOSED, "{label}: fresh status");
            assert_eq!(channel.create(), Status::OK, "{label}: create");
            assert_eq!(channel.create(), Status::CLOSED, "{label}: re-create");
            assert_eq!(channel.status(), Status::OK, "{label}: live status");
            let begin = Instant::now();
            channel.add_message(Message::data(id, vec![1, 2, 3]));
            assert!(
                begin.elapsed() < Duration::from_millis(50),
                "{label}: add_message must not block"
            );
            assert_eq!(channel.destroy(), Status::OK, "{label}: destroy");
            assert_eq!(channel.destroy(), Status::OK, "{label}: destroy again");
            assert_eq!(channel.status(), Status::CLOSED, "{label}: final status");
            assert_eq!(channel.create(), Status::CLOSED, "{label}: create after end");
        }
        assert!(
            started.elapsed() < Duration::from_secs(10),
            "conformance took {:?}",
            started.elapsed()
        );
    });
}

// --- 2. handler contract under concurrency --------------------------------

struct BurstChannel {
    id: ChannelId,
    host: Arc<dyn ChannelHost>,
    count: u32,
    started: AtomicBool,
    thread: Mutex<Option<std::thread::JoinHandle<()>>>,
}

impl Channel for BurstChannel {
    fn create(&self) -> Status {
        if self.started.swap(true, Ordering::SeqCst) {
            return Status::CLOSED;
        }
        let host = Arc::clone(&self.host);
        let (id, count) = (self.id, self.count);
        *self.thread.lock().unwrap() = Some(std::thread::spawn(move || {
            for seq in 0..count {
                host.on_channel_message(Message::data(id, seq.to_le_bytes().to_vec()));
            }
        }));
        Status::OK
    }
    fn destroy(&self) -> Status {
        if let Some(t) = self.thread.lock().unwrap().take() {
            let _ = t.join();
        }
        Status::OK
    }
    fn status(&self) -> Status {
        Status::OK
    }
    fn add_message(&self, _msg: Message) {}
}

#[test]
fn acceptance_02_handler_queue_conservation() {
    criterion(2, "handler delivers 80,000 messages exactly once", || {
        let started = Instant::now();
        let producers: u64 = 8;
        let per_producer: u32 = 10_000;

        let handler = ChannelHandler::new();
        let factory: Arc<ChannelFactory> = Arc::new(move |_info, id, host| {
            Ok(Arc::new(BurstChannel {
                id,
                host,
                count: per_producer,
                started: AtomicBool::new(false),
                thread: Mutex::new(None),
            }) as Arc<dyn Channel>)
        });
        assert_eq!(handler.register_channel_type("mem-burst", factory), Status::OK);

        let burst_info = ChannelInfo::new(
            ChannelType::Other("mem-burst".into()),
            Endpoint::new("127.0.0.1", 1).unwrap(),
        );
        let mut ids = Vec::new();
        for _ in 0..producers {
            ids.push(handler.create_channel(&burst_info).unwrap());
        }

        let expected = producers * per_producer as u64;
        let mut next_seq: HashMap<u64, u32> = HashMap::new();
        let mut total: u64 = 0;
        let deadline = Instant::now() + Duration::from_secs(30);
        while total < expected {
            assert!(Instant::now() < deadline, "only {total}/{expected} arrived");
            match handler.wait_message(Duration::from_millis(100)).unwrap() {
                None => continue,
                Some(msg) => {
                    assert_eq!(msg.kind, MessageKind::Data);
                    let seq = u32::from_le_bytes(msg.payload.as_slice().try_into().unwrap());
                    let slot = next_seq.entry(msg.channel_id.get()).or_insert(0);
                    assert_eq!(seq, *slot, "per-channel FIFO broke on {}", msg.channel_id);
                    *slot += 1;
                    total += 1;
                }
            }
        }
        assert_eq!(total, expected, "no loss");
        assert_eq!(handler.get_message(), Ok(None), "no duplication");
        assert_eq!(next_seq.len() as u64, producers);
        assert!(next_seq.values().all(|&n| n == per_producer));
        assert!(
            started.elapsed() < Duration::from_secs(30),
            "took {:?}",
            started.elapsed()
        );
    });
}

// --- shared helpers for the binary-driven transfers ------------------------

fn channelctl() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_channelctl"));
    cmd.stdout(Stdio::piped()).stderr(Stdio::piped());
    cmd
}

fn sha256(data: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(data);
    hasher.finalize().into()
}

/// One send/serve exchange over the binaries; returns the received
/// file's checksum. The invocations depend only on the type tokens.
fn transfer_once(server_type: &str, client_type: &str, port: u16, input: &Path) -> [u8; 32] {
    let out = tempfile::tempdir().unwrap();
    let mut serve = channelctl()
        .args([
            "serve",
            "--type",
            server_type,
            "--addr",
            &format!("127.0.0.1:{port}"),
            "--out",
            out.path().to_str().unwrap(),
            "--opt",
            "idle_timeout=1",
            "--opt",
            "soap_reply_wait=0",
        ])
        .spawn()
        .unwrap();
    std::thread::sleep(Duration::from_millis(200));

    let send = channelctl()
        .args([
            "send",
            "--type",
            client_type,
            "--addr",
            &format!("127.0.0.1:{port}"),
            "--file",
            input.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        send.status.success(),
        "send over {client_type} failed: {}",
        String::from_utf8_lossy(&send.stderr)
    );

    let expected_len = std::fs::metadata(input).unwrap().len();
    let deadline = Instant::now() + Duration::from_secs(15);
    let received = loop {
        assert!(Instant::now() < deadline, "receiver never completed");
        let files: Vec<_> = std::fs::read_dir(out.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "bin"))
            .collect();
        if files.len() == 1 {
            let data = std::fs::read(&files[0]).unwrap();
            if data.len() as u64 == expected_len {
                break data;
            }
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    unsafe {
        libc::kill(serve.id() as libc::pid_t, libc::SIGTERM);
    }
    let _ = serve.wait();
    sha256(&received)
}

// --- 3. TCP byte conservation ----------------------------------------------

#[test]
fn acceptance_03_tcp_byte_conservation_10mib() {
    criterion(3, "10 MiB over loopback TCP, checksums equal", || {
        let started = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("input.dat");
        let mut rng = rand::rngs::StdRng::seed_from_u64(3003);
        let mut data = vec![0u8; 10 * 1024 * 1024];
        rng.fill_bytes(&mut data);
        std::fs::write(&input, &data).unwrap();

        let got = transfer_once("tcp-server", "tcp-client", free_tcp_port(), &input);
        assert_eq!(got, sha256(&data), "checksum mismatch");
        assert!(
            started.elapsed() < Duration::from_secs(10),
            "took {:?}",
            started.elapsed()
        );
    });
}

// --- 4. UDP demultiplexing --------------------------------------------------

#[test]
fn acceptance_04_udp_demux_scripted_sources() {
    criterion(4, "UDP demux: 3 sources, stable IDs, boundaries kept", || {
        let port = free_udp_port();
        let handler = ChannelHandler::new();
        handler
            .create_channel(&info(ChannelType::UdpServer, port))
            .unwrap();

        let sockets: Vec<UdpSocket> =
            (0..3).map(|_| UdpSocket::bind("127.0.0.1:0").unwrap()).collect();
        let script = [0usize, 1, 2, 0, 1, 2, 0, 0, 1, 2];
        for (i, &s) in script.iter().enumerate() {
            sockets[s]
                .send_to(&[s as u8, i as u8], ("127.0.0.1", port))
                .unwrap();
            std::thread::sleep(Duration::from_millis(2));
        }

        let mut connected: HashMap<u16, ChannelId> = HashMap::new();
        let mut first_kind: HashMap<u64, MessageKind> = HashMap::new();
        let mut data = 0usize;
        let deadline = Instant::now() + Duration::from_secs(5);
        while data < script.len() {
            assert!(Instant::now() < deadline, "lost datagrams: {data}/{}", script.len());
            let Ok(Some(msg)) = handler.wait_message(Duration::from_millis(200)) else {
                continue;
            };
            first_kind.entry(msg.channel_id.get()).or_insert(msg.kind);
            match msg.kind {
                MessageKind::Connected => {
                    connected.insert(msg.remote.unwrap().port(), msg.channel_id);
                }
                MessageKind::Data => {
                    let source = &sockets[msg.payload[0] as usize];
                    let expected = connected[&source.local_addr().unwrap().port()];
                    assert_eq!(msg.channel_id, expected, "source-to-ID mapping unstable");
                    data += 1;
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert_eq!(connected.len(), 3, "exactly 3 connections");
        let mut ids: Vec<_> = connected.values().collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 3, "IDs are distinct");
        assert_eq!(data, script.len(), "one data message per datagram");
        assert!(
            first_kind.values().all(|k| *k == MessageKind::Connected),
            "connected precedes data for every child"
        );
    });
}

// --- 5. UDP idle expiry ------------------------------------------------------

#[test]
fn acceptance_05_udp_idle_expiry() {
    criterion(5, "UDP idle expiry at 1s, fresh ID on re-contact", || {
        // Deterministic half: the emulation table under a scripted clock.
        let mut table = PeerTable::new();
        let source = Endpoint::new("127.0.0.1", 50_000).unwrap();
        let first = ChannelId::new(10).unwrap();
        assert_eq!(
            table.observe(&source, 0, || first),
            PeerLookup::New(first)
        );
        assert!(table.sweep(1_000, 999).is_empty(), "not yet idle");
        let expired = table.sweep(1_000, 1_500);
        assert_eq!(expired, vec![(source.clone(), first)], "expired by 1.5s");
        let second = ChannelId::new(11).unwrap();
        assert_eq!(
            table.observe(&source, 1_500, || second),
            PeerLookup::New(second),
            "re-contact opens a fresh connection"
        );

        // Live half: a silent peer against a real server channel.
        let port = free_udp_port();
        let handler = ChannelHandler::new();
        handler
            .create_channel(
                &info(ChannelType::UdpServer, port).with_option(options::IDLE_TIMEOUT, "1"),
            )
            .unwrap();
        let peer = UdpSocket::bind("127.0.0.1:0").unwrap();
        peer.send_to(b"hello", ("127.0.0.1", port)).unwrap();
        let live_first =
            await_kind(&handler, MessageKind::Connected, Duration::from_secs(2)).channel_id;
        let silent_since = Instant::now();
        let down = await_kind(&handler, MessageKind::Disconnected, Duration::from_secs(3));
        assert_eq!(down.channel_id, live_first);
        assert!(
            silent_since.elapsed() < Duration::from_secs(2),
            "disconnect after {:?}",
            silent_since.elapsed()
        );
        peer.send_to(b"again", ("127.0.0.1", port)).unwrap();
        let live_second =
            await_kind(&handler, MessageKind::Connected, Duration::from_secs(2)).channel_id;
        assert_ne!(live_second, live_first);
    });
}

// --- 6. SOAP golden -----------------------------------------------------------

#[test]
fn acceptance_06_soap_envelope_golden() {
    criterion(6, "raw-data envelope matches checked-in golden bytes", || {
        let cases: [(&str, &[u8], &str); 4] = [
            ("hi", b"hi", "urn:simple-calc"),
            ("empty", b"", "urn:simple-calc"),
            ("binary", &[0x00, 0x01, 0x02, 0xFE, 0xFF], "urn:simple-calc"),
            ("stream_urn", b"stream of opaque bytes", "urn:media-stream"),
        ];
        for (name, payload, urn) in cases {
            let golden_path = Path::new(env!("CARGO_MANIFEST_DIR"))
                .join("tests/golden")
                .join(format!("raw_data_envelope_{name}.xml"));
            let golden = std::fs::read(&golden_path).unwrap();
            let encoded = soap::encode_raw_data_envelope(payload, urn);
            assert_eq!(
                encoded, golden,
                "byte-exact golden mismatch for case {name}"
            );
            assert_eq!(soap::decode_raw_data_envelope(&golden).unwrap(), payload);
        }

        // Element tree and the exact namespace bindings.
        let text = std::str::from_utf8(
            &std::fs::read(
                Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/raw_data_envelope_hi.xml"),
            )
            .unwrap(),
        )
        .unwrap()
        .to_string();
        let envelope_pos = text.find("<SOAP-ENV:Envelope").unwrap();
        let body_pos = text.find("<SOAP-ENV:Body").unwrap();
        let raw_pos = text.find("<ns:rawDataMessage>").unwrap();
        let data_pos = text.find("<data xsi:type=\"xsd:base64Binary\">").unwrap();
        assert!(envelope_pos < body_pos && body_pos < raw_pos && raw_pos < data_pos);
        for binding in [
            "xmlns:SOAP-ENV=\"http://schemas.xmlsoap.org/soap/envelope/\"",
            "xmlns:SOAP-ENC=\"http://schemas.xmlsoap.org/soap/encoding/\"",
            "xmlns:xsi=\"http://www.w3.org/1999/XMLSchema-instance\"",
            "xmlns:xsd=\"http://www.w3.org/1999/XMLSchema\"",
            "xmlns:ns=\"urn:simple-calc\"",
        ] {
            assert!(text.contains(binding), "missing {binding}");
        }
        assert!(text.contains(
            "SOAP-ENV:encodingStyle=\"http://schemas.xmlsoap.org/soap/encoding/\""
        ));
        assert!(text.contains(">aGk=</data>"));
    });
}

// --- 7. SOAP round-trip property ----------------------------------------------

#[test]
fn acceptance_07_soap_round_trip_and_base64_reference() {
    criterion(7, "envelope round-trip and base64 reference agreement", || {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7007);

        // 1,000 random payloads, lengths mixed from 0 up to 1 MiB.
        for i in 0..1_000 {
            let len = match i {
                0 => 1024 * 1024,
                _ if i % 50 == 0 => rng.gen_range(128 * 1024..=1024 * 1024),
                _ => rng.gen_range(0..4096),
            };
            let mut payload = vec![0u8; len];
            rng.fill_bytes(&mut payload);
            let doc = soap::encode_raw_data_envelope(&payload, "urn:simple-calc");
            assert_eq!(
                soap::decode_raw_data_envelope(&doc).unwrap(),
                payload,
                "round-trip mismatch at case {i} (len {len})"
            );
        }
        // All 256 single-byte payloads.
        for byte in 0..=255u8 {
            let doc = soap::encode_raw_data_envelope(&[byte], "urn:simple-calc");
            assert_eq!(soap::decode_raw_data_envelope(&doc).unwrap(), [byte]);
        }
        // base64 against an independent reference, 10,000 inputs.
        let reference = base64::engine::general_purpose::STANDARD;
        for _ in 0..10_000 {
            let len = rng.gen_range(0..256);
            let mut data = vec![0u8; len];
            rng.fill_bytes(&mut data);
            let ours = b64::encode(&data);
            assert_eq!(ours, reference.encode(&data), "encode mismatch");
            assert_eq!(b64::decode(&ours).unwrap(), data, "decode mismatch");
        }
    });
}

// --- 8. HTTP parser split-invariance --------------------------------------------

#[test]
fn acceptance_08_http_parser_split_invariance() {
    criterion(8, "HTTP parsing identical across all 2-way splits", || {
        let started = Instant::now();
        let body: Vec<u8> = (0..=255u8).cycle().take(600).collect();
        let envelope = soap::encode_raw_data_envelope(&body, "urn:simple-calc");
        let raw = frame_request(&envelope, "127.0.0.1:9000", "/stream");

        let mut whole = HttpParser::new();
        whole.feed(&raw);
        let expected = whole.next_message().unwrap().unwrap();

        for split in 0..=raw.len() {
            let mut parser = HttpParser::new();
            parser.feed(&raw[..split]);
            let mut got = parser.next_message().unwrap();
            parser.feed(&raw[split..]);
            if got.is_none() {
                got = parser.next_message().unwrap();
            }
            let msg = got.unwrap_or_else(|| panic!("no message at split {split}"));
            assert_eq!(msg, expected, "split at {split} parsed differently");
            assert_eq!(parser.next_message().unwrap(), None, "trailing garbage at {split}");
        }
        assert!(
            started.elapsed() < Duration::from_secs(10),
            "took {:?}",
            started.elapsed()
        );
    });
}

// --- 9. transport swap ------------------------------------------------------------

#[test]
fn acceptance_09_transport_swap() {
    criterion(9, "same invocation over tcp/udp/soap reproduces checksum", || {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("input.dat");
        let mut rng = rand::rngs::StdRng::seed_from_u64(9009);
        let mut data = vec![0u8; 1_500_000];
        rng.fill_bytes(&mut data);
        std::fs::write(&input, &data).unwrap();
        let want = sha256(&data);

        for (server_type, client_type) in [
            ("tcp-server", "tcp-client"),
            ("udp-server", "udp-client"),
            ("soap-server", "soap-client"),
        ] {
            let port = if server_type == "udp-server" {
                free_udp_port()
            } else {
                free_tcp_port()
            };
            let got = transfer_once(server_type, client_type, port, &input);
            assert_eq!(got, want, "checksum diverged over {client_type}");
        }
    });
}

// --- 10. non-blocking contract -------------------------------------------------------

/// A channel whose writer never drains: the exact foil for the drop
/// arithmetic. Deliberately minimal.
struct BlackholeChannel {
    queue: Mutex<(usize, u64)>, // (queued, dropped)
    capacity: usize,
}

impl Channel for BlackholeChannel {
    fn create(&self) -> Status {
        Status::OK
    }
    fn destroy(&self) -> Status {
        Status::OK
    }
    fn status(&self) -> Status {
        Status::OK
    }
    fn add_message(&self, _msg: Message) {
        let mut q = self.queue.lock().unwrap();
        if q.0 >= self.capacity {
            q.1 += 1;
        } else {
            q.0 += 1;
        }
    }
    fn stats(&self) -> ChannelStats {
        let q = self.queue.lock().unwrap();
        ChannelStats {
            pending: q.0,
            capacity: self.capacity,
            dropped: q.1,
        }
    }
}

#[test]
fn acceptance_10_non_blocking_add_message() {
    criterion(10, "add_message latency p99 < 1ms, exact drop count", || {
        // Latency against a real TCP peer that never reads, queue large
        // enough that nothing is dropped.
        let port = free_tcp_port();
        let listener = TcpListener::bind(("127.0.0.1", port)).unwrap();
        let handler = ChannelHandler::new();
        let out = handler
            .create_channel(
                &info(ChannelType::TcpClient, port)
                    .with_option(options::QUEUE_CAPACITY, "2048"),
            )
            .unwrap();
        let (_held_conn, _) = listener.accept().unwrap();

        let payload = vec![0u8; 8 * 1024];
        let mut latencies = Vec::with_capacity(1_000);
        for _ in 0..1_000 {
            let begin = Instant::now();
            handler
                .send_to_channel(Message::data(out, payload.clone()))
                .unwrap();
            latencies.push(begin.elapsed());
        }
        latencies.sort();
        let p99 = latencies[989];
        assert!(
            p99 < Duration::from_millis(1),
            "p99 add_message latency {p99:?}"
        );

        // Drop arithmetic against a stalled writer: with capacity C and
        // N attempts, exactly N - C are dropped.
        let capacity = 64usize;
        let attempts = 1_000u64;
        let stalled = ChannelHandler::new();
        let factory: Arc<ChannelFactory> = Arc::new(move |_info, _id, _host| {
            Ok(Arc::new(BlackholeChannel {
                queue: Mutex::new((0, 0)),
                capacity,
            }) as Arc<dyn Channel>)
        });
        stalled.register_channel_type("mem-blackhole", factory);
        let hole = stalled
            .create_channel(&ChannelInfo::new(
                ChannelType::Other("mem-blackhole".into()),
                local(1),
            ))
            .unwrap();
        for _ in 0..attempts {
            stalled
                .send_to_channel(Message::data(hole, b"x".to_vec()))
                .unwrap();
        }
        let stats = stalled.channel_stats(hole).unwrap();
        assert_eq!(
            stats.dropped,
            attempts - capacity as u64,
            "drop counter must equal attempts minus capacity"
        );
        assert_eq!(stats.pending, capacity);
    });
}
