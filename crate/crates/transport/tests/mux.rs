//! Multiplexing and backend-transparency tests: concurrent calls on one
//! connection must never mismatch request and response ids, on either
//! backing.

use bytes::Bytes;
use dlsm_transport::frame::Frame;
use dlsm_transport::opcode;
use dlsm_transport::{SimNet, SimNetConfig, TcpServer, TcpTransport, Transport};
use std::sync::Arc;
use std::time::Duration;

/// Echoes the payload back after a tiny variable delay so responses come
/// back out of order.
fn jittery_echo() -> Arc<dyn dlsm_transport::Handler> {
    Arc::new(|f: Frame| {
        let d = (f.payload.len() % 3) as u64;
        if d > 0 {
            std::thread::sleep(Duration::from_micros(50 * d));
        }
        Frame { request_id: f.request_id, kind: f.response_kind(), epoch: f.epoch, payload: f.payload }
    })
}

fn hammer(transport: Arc<dyn Transport>, endpoint: &str, threads: usize, calls_per_thread: usize) {
    let mut joins = Vec::new();
    for t in 0..threads {
        let transport = transport.clone();
        let endpoint = endpoint.to_string();
        joins.push(std::thread::spawn(move || {
            for i in 0..calls_per_thread {
                let body = format!("thread{t}-call{i}-{}", "x".repeat(i % 17));
                let frame = Frame::new(opcode::ECHO, 0, Bytes::from(body.clone().into_bytes()));
                let resp = transport
                    .call(&endpoint, frame, Duration::from_secs(10))
                    .expect("call failed");
                assert_eq!(
                    resp.payload.as_ref(),
                    body.as_bytes(),
                    "response matched to the wrong request"
                );
            }
        }));
    }
    for j in joins {
        j.join().unwrap();
    }
}

#[test]
fn tcp_mux_10k_concurrent_calls_no_mismatch() {
    let server = TcpServer::bind("127.0.0.1:0", jittery_echo()).unwrap();
    let addr = server.local_addr().to_string();
    let transport: Arc<dyn Transport> = Arc::new(TcpTransport::new());
    hammer(transport, &addr, 20, 500);
}

#[test]
fn sim_mux_10k_concurrent_calls_no_mismatch() {
    let net = SimNet::new(SimNetConfig { seed: 1, base_latency_us: 0, jitter_mean_us: 20 });
    net.register("svc", jittery_echo());
    let transport: Arc<dyn Transport> = Arc::new(net.endpoint("client"));
    hammer(transport, "svc", 20, 500);
}
