//! Opcode registry for the shared protocol. One u16 space for every
//! service so any component can decode any frame kind. Responses set the
//! top bit (see [`crate::frame::RESPONSE_BIT`]).

// Diagnostics
pub const ECHO: u16 = 0x0001;

// Storage component
pub const STOC_PUT_OBJECT: u16 = 0x0101;
pub const STOC_GET_OBJECT: u16 = 0x0102;
pub const STOC_DELETE_OBJECT: u16 = 0x0103;
pub const STOC_APPEND_LOG: u16 = 0x0104;
pub const STOC_READ_LOG: u16 = 0x0105;
pub const STOC_TRUNCATE_LOG: u16 = 0x0106;
pub const STOC_STATS: u16 = 0x0107;
pub const STOC_LIST_OBJECTS: u16 = 0x0108;
pub const STOC_FENCE_LOG: u16 = 0x0109;

// LSM-tree component: client data plane
pub const LTC_PUT: u16 = 0x0201;
pub const LTC_GET: u16 = 0x0202;
pub const LTC_DELETE: u16 = 0x0203;
pub const LTC_SCAN: u16 = 0x0204;
// LSM-tree component: control plane
pub const LTC_ADOPT_RANGE: u16 = 0x0210;
pub const LTC_RELEASE_RANGE: u16 = 0x0211;
pub const LTC_STATUS: u16 = 0x0212;
pub const LTC_FLUSH_RANGE: u16 = 0x0213;

// Coordinator
pub const COORD_GET_VIEW: u16 = 0x0301;
pub const COORD_HEARTBEAT: u16 = 0x0302;
pub const COORD_REPORT_LOAD: u16 = 0x0303;
pub const COORD_ADD_LTC: u16 = 0x0304;
pub const COORD_REMOVE_LTC: u16 = 0x0305;
pub const COORD_ROUTE: u16 = 0x0306;

// Compaction worker
pub const WORKER_EXECUTE: u16 = 0x0401;
pub const WORKER_STATUS: u16 = 0x0402;

pub fn name(kind: u16) -> &'static str {
    match kind & !crate::frame::RESPONSE_BIT {
        ECHO => "ECHO",
        STOC_PUT_OBJECT => "STOC_PUT_OBJECT",
        STOC_GET_OBJECT => "STOC_GET_OBJECT",
        STOC_DELETE_OBJECT => "STOC_DELETE_OBJECT",
        STOC_APPEND_LOG => "STOC_APPEND_LOG",
        STOC_READ_LOG => "STOC_READ_LOG",
        STOC_TRUNCATE_LOG => "STOC_TRUNCATE_LOG",
        STOC_STATS => "STOC_STATS",
        STOC_LIST_OBJECTS => "STOC_LIST_OBJECTS",
        STOC_FENCE_LOG => "STOC_FENCE_LOG",
        LTC_PUT => "LTC_PUT",
        LTC_GET => "LTC_GET",
        LTC_DELETE => "LTC_DELETE",
        LTC_SCAN => "LTC_SCAN",
        LTC_ADOPT_RANGE => "LTC_ADOPT_RANGE",
        LTC_RELEASE_RANGE => "LTC_RELEASE_RANGE",
        LTC_STATUS => "LTC_STATUS",
        LTC_FLUSH_RANGE => "LTC_FLUSH_RANGE",
        COORD_GET_VIEW => "COORD_GET_VIEW",
        COORD_HEARTBEAT => "COORD_HEARTBEAT",
        COORD_REPORT_LOAD => "COORD_REPORT_LOAD",
        COORD_ADD_LTC => "COORD_ADD_LTC",
        COORD_REMOVE_LTC => "COORD_REMOVE_LTC",
        COORD_ROUTE => "COORD_ROUTE",
        WORKER_EXECUTE => "WORKER_EXECUTE",
        WORKER_STATUS => "WORKER_STATUS",
        _ => "UNKNOWN",
    }
}
