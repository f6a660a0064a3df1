//! Service-level tests over the simulated transport: concurrency,
//! durability across kill/restart, and read-anywhere behavior.

use bytes::Bytes;
use dlsm_core::ObjectId;
use dlsm_stoc::{BackingTier, StocClient, StocConfig, StocServer};
use dlsm_transport::{SimNet, SimNetConfig, Transport};
use std::sync::Arc;

fn boot(net: &SimNet, name: &str, cfg: StocConfig) -> Arc<StocServer> {
    let server = Arc::new(StocServer::open(cfg).unwrap());
    net.register(name, server.clone());
    server
}

fn client(net: &SimNet, from: &str, to: &str) -> StocClient {
    let t: Arc<dyn Transport> = Arc::new(net.endpoint(from));
    StocClient::new(t, to)
}

#[test]
fn concurrent_puts_all_retrievable() {
    let net = SimNet::new(SimNetConfig::default());
    let server = boot(&net, "stoc", StocConfig::default());
    let mut joins = Vec::new();
    for t in 0..10u64 {
        let net = net.clone();
        joins.push(std::thread::spawn(move || {
            let c = client(&net, &format!("client-{t}"), "stoc");
            for i in 0..10u64 {
                let id = ObjectId::new(1, t * 100 + i);
                let body = vec![(t * 10 + i) as u8; (i + 1) as usize];
                c.put_object(id, Bytes::from(body)).unwrap();
            }
        }));
    }
    for j in joins {
        j.join().unwrap();
    }
    let c = client(&net, "verifier", "stoc");
    let mut total = 0u64;
    for t in 0..10u64 {
        for i in 0..10u64 {
            let id = ObjectId::new(1, t * 100 + i);
            let got = c.get_object(id, 0, i + 1).unwrap();
            assert_eq!(got.as_ref(), vec![(t * 10 + i) as u8; (i + 1) as usize].as_slice());
            total += i + 1;
        }
    }
    let stats = server.stats();
    assert_eq!(stats.bytes_stored, total);
    assert_eq!(stats.object_count, 100);
}

#[test]
fn concurrent_appends_dense_lsns() {
    let net = SimNet::new(SimNetConfig::default());
    boot(&net, "stoc", StocConfig::default());
    let mut joins = Vec::new();
    for t in 0..4 {
        let net = net.clone();
        joins.push(std::thread::spawn(move || {
            let c = client(&net, &format!("client-{t}"), "stoc");
            let mut lsns = Vec::new();
            for i in 0..2500u32 {
                let body = format!("t{t}i{i}");
                lsns.push(c.append_log(42, 0, Bytes::from(body.into_bytes())).unwrap());
            }
            lsns
        }));
    }
    let mut all: Vec<u64> = joins.into_iter().flat_map(|j| j.join().unwrap()).collect();
    all.sort_unstable();
    let expect: Vec<u64> = (1..=10_000).collect();
    assert_eq!(all, expect, "LSNs must be dense with no loss");
    let c = client(&net, "verifier", "stoc");
    assert_eq!(c.read_log(42, 1).unwrap().len(), 10_000);
}

#[test]
fn read_anywhere_across_clients() {
    let net = SimNet::new(SimNetConfig::default());
    boot(&net, "stoc", StocConfig::default());
    let writer = client(&net, "writer", "stoc");
    let id = ObjectId::new(3, 9);
    writer.put_object(id, Bytes::from_static(b"shared-bytes")).unwrap();
    for name in ["reader-a", "reader-b", "reader-c"] {
        let c = client(&net, name, "stoc");
        assert_eq!(c.get_object(id, 0, 12).unwrap().as_ref(), b"shared-bytes");
    }
}

#[test]
fn disk_tier_survives_kill_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let tier = BackingTier::DiskBacked(dir.path().to_path_buf());
    let net = SimNet::new(SimNetConfig::default());
    let cfg = StocConfig { tier: tier.clone(), ..Default::default() };
    boot(&net, "stoc", cfg.clone());

    let c = client(&net, "client", "stoc");
    let id = ObjectId::new(1, 1);
    let receipt = c.put_object(id, Bytes::from_static(b"durable")).unwrap();
    let lsn = c.append_log(5, 1, Bytes::from_static(b"logged")).unwrap();
    assert_eq!(lsn, 1);

    // kill: drop the server without any shutdown path, files stay
    net.unregister("stoc");
    assert!(c.stats().is_err());

    // restart over the same directory
    boot(&net, "stoc", cfg);
    let got = c.get_object(id, 0, receipt.len).unwrap();
    assert_eq!(got.as_ref(), b"durable");
    let records = c.read_log(5, 0).unwrap();
    assert_eq!(records, vec![(1, Bytes::from_static(b"logged"))]);
}

#[test]
fn memory_tier_loses_state_on_restart_by_design() {
    let net = SimNet::new(SimNetConfig::default());
    boot(&net, "stoc", StocConfig::default());
    let c = client(&net, "client", "stoc");
    let id = ObjectId::new(1, 1);
    c.put_object(id, Bytes::from_static(b"volatile")).unwrap();
    net.unregister("stoc");
    boot(&net, "stoc", StocConfig::default());
    assert!(matches!(
        c.get_object(id, 0, 8).unwrap_err(),
        dlsm_transport::RpcError::Remote(dlsm_transport::WireError::NotFound)
    ));
}

#[test]
fn stats_outstanding_drains_after_load() {
    let net = SimNet::new(SimNetConfig::default());
    let server = boot(
        &net,
        "stoc",
        StocConfig { inject_latency_us: 2_000, ..Default::default() },
    );
    let mut joins = Vec::new();
    for t in 0..8 {
        let net = net.clone();
        joins.push(std::thread::spawn(move || {
            let c = client(&net, &format!("c{t}"), "stoc");
            for _ in 0..5 {
                c.stats().unwrap();
            }
        }));
    }
    for j in joins {
        j.join().unwrap();
    }
    let s = server.stats();
    assert_eq!(s.outstanding_requests, 0, "outstanding must return to zero after drain");
    assert!(s.ewma_latency_us >= 1_500, "ewma grew under injected latency");
}
