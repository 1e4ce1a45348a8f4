//! Minimal bag v2.0 reader and message decoders, written from the public
//! format description without touching the exporter.

use std::collections::{BTreeMap, HashMap};

pub struct Cursor<'a> {
    pub b: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(b: &'a [u8]) -> Self {
        Self { b, pos: 0 }
    }
    pub fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.b[self.pos..self.pos + n];
        self.pos += n;
        s
    }
    pub fn u8(&mut self) -> u8 {
        self.take(1)[0]
    }
    pub fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().unwrap())
    }
    pub fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take(4).try_into().unwrap())
    }
    pub fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().unwrap())
    }
    pub fn string(&mut self) -> String {
        let n = self.u32() as usize;
        String::from_utf8(self.take(n).to_vec()).unwrap()
    }
    pub fn done(&self) -> bool {
        self.pos == self.b.len()
    }
}

type Fields = HashMap<String, Vec<u8>>;

fn fields(b: &[u8]) -> Fields {
    let mut c = Cursor::new(b);
    let mut out = HashMap::new();
    while !c.done() {
        let n = c.u32() as usize;
        let f = c.take(n);
        let eq = f.iter().position(|&x| x == b'=').expect("field without '='");
        let name = String::from_utf8(f[..eq].to_vec()).unwrap();
        assert!(out.insert(name, f[eq + 1..].to_vec()).is_none(), "repeated header field");
    }
    out
}

fn u32_of(f: &Fields, k: &str) -> u32 {
    u32::from_le_bytes(f[k].as_slice().try_into().unwrap())
}

fn u64_of(f: &Fields, k: &str) -> u64 {
    u64::from_le_bytes(f[k].as_slice().try_into().unwrap())
}

fn time_of(f: &Fields, k: &str) -> (u32, u32) {
    let t = &f[k];
    (
        u32::from_le_bytes(t[..4].try_into().unwrap()),
        u32::from_le_bytes(t[4..].try_into().unwrap()),
    )
}

/// Reads `(header fields, data)` records until the cursor is exhausted.
fn records(b: &[u8], start: usize) -> Vec<(usize, Fields, &[u8])> {
    let mut c = Cursor { b, pos: start };
    let mut out = Vec::new();
    while !c.done() {
        let at = c.pos;
        let hl = c.u32() as usize;
        let h = fields(c.take(hl));
        let dl = c.u32() as usize;
        out.push((at, h, c.take(dl)));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conn {
    pub topic: String,
    pub ty: String,
    pub md5sum: String,
    pub definition: String,
    pub latching: bool,
}

#[derive(Clone, Debug)]
pub struct Msg {
    pub conn: u32,
    pub time: (u32, u32),
    pub chunk: usize,
    pub data: Vec<u8>,
}

#[derive(Debug, Default)]
pub struct Bag {
    pub conn_count: u32,
    pub chunk_count: u32,
    pub index_pos: u64,
    pub header_record_len: usize,
    pub connections: BTreeMap<u32, Conn>,
    pub messages: Vec<Msg>,
}

impl Bag {
    pub fn topic_counts(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for m in &self.messages {
            *out.entry(self.connections[&m.conn].topic.clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn on_topic(&self, topic: &str) -> Vec<&Msg> {
        self.messages
            .iter()
            .filter(|m| self.connections[&m.conn].topic == topic)
            .collect()
    }
}

fn conn_from(h: &Fields, data: &[u8]) -> (u32, Conn) {
    let d = fields(data);
    let s = |k: &str| String::from_utf8(d[k].clone()).unwrap();
    assert_eq!(h["topic"], d["topic"], "connection topic in header and data differ");
    (
        u32_of(h, "conn"),
        Conn {
            topic: s("topic"),
            ty: s("type"),
            md5sum: s("md5sum"),
            definition: s("message_definition"),
            latching: d.get("latching").map(|v| v == b"1").unwrap_or(false),
        },
    )
}

/// Parses a whole bag, cross-checking index, chunk-info and header records
/// against the chunk contents. Panics on any inconsistency.
/// Per connection: `(time, offset)` entries.
type ConnIndex = BTreeMap<u32, Vec<((u32, u32), u32)>>;

pub fn parse(b: &[u8]) -> Bag {
    assert_eq!(&b[..13], b"#ROSBAG V2.0\n");
    let recs = records(b, 13);
    let mut bag = Bag::default();
    let (_, h0, d0) = &recs[0];
    assert_eq!(h0["op"], [0x03]);
    bag.conn_count = u32_of(h0, "conn_count");
    bag.chunk_count = u32_of(h0, "chunk_count");
    bag.index_pos = u64_of(h0, "index_pos");
    bag.header_record_len = recs.get(1).map_or(b.len(), |r| r.0) - 13;
    assert!(d0.iter().all(|&c| c == b' '), "bag header padding");

    let mut chunk_positions = Vec::new();
    let mut in_chunk_conns = BTreeMap::new();
    let mut chunk_msgs: Vec<ConnIndex> = Vec::new();
    let mut indexed: Vec<ConnIndex> = Vec::new();
    let mut chunk_infos = Vec::new();
    let mut trailing_conns = BTreeMap::new();
    let mut seen_index_pos = false;

    for (at, h, data) in &recs[1..] {
        match h["op"][0] {
            0x05 => {
                assert!(!seen_index_pos, "chunk after index section");
                assert_eq!(h["compression"], b"none");
                assert_eq!(u32_of(h, "size") as usize, data.len());
                chunk_positions.push(*at as u64);
                let mut per_conn: ConnIndex = BTreeMap::new();
                for (off, ih, idata) in records(data, 0) {
                    match ih["op"][0] {
                        0x07 => {
                            let (id, c) = conn_from(&ih, idata);
                            assert!(in_chunk_conns.insert(id, c).is_none(), "connection repeated in chunks");
                        }
                        0x02 => {
                            let conn = u32_of(&ih, "conn");
                            assert!(in_chunk_conns.contains_key(&conn), "message before its connection");
                            let time = time_of(&ih, "time");
                            per_conn.entry(conn).or_default().push((time, off as u32));
                            bag.messages.push(Msg {
                                conn,
                                time,
                                chunk: chunk_positions.len() - 1,
                                data: idata.to_vec(),
                            });
                        }
                        op => panic!("unexpected op {op:#x} inside chunk"),
                    }
                }
                chunk_msgs.push(per_conn);
                indexed.push(BTreeMap::new());
            }
            0x04 => {
                assert_eq!(u32_of(h, "ver"), 1);
                let conn = u32_of(h, "conn");
                let count = u32_of(h, "count") as usize;
                assert_eq!(data.len(), count * 12);
                let mut c = Cursor::new(data);
                let entries: Vec<_> = (0..count).map(|_| ((c.u32(), c.u32()), c.u32())).collect();
                let slot = indexed.last_mut().expect("index before any chunk");
                assert!(slot.insert(conn, entries).is_none());
            }
            0x07 => {
                if !seen_index_pos {
                    assert_eq!(*at as u64, bag.index_pos, "index_pos does not point at the first connection");
                    seen_index_pos = true;
                }
                let (id, c) = conn_from(h, data);
                trailing_conns.insert(id, c);
            }
            0x06 => {
                assert_eq!(u32_of(h, "ver"), 1);
                let count = u32_of(h, "count") as usize;
                let mut c = Cursor::new(data);
                let counts: BTreeMap<u32, u32> = (0..count).map(|_| (c.u32(), c.u32())).collect();
                chunk_infos.push((u64_of(h, "chunk_pos"), time_of(h, "start_time"), time_of(h, "end_time"), counts));
            }
            op => panic!("unexpected top-level op {op:#x}"),
        }
    }
    if !seen_index_pos {
        assert_eq!(bag.index_pos as usize, b.len(), "index_pos of a bag without connections");
    }
    assert_eq!(chunk_msgs, indexed, "index records disagree with chunk contents");
    assert_eq!(chunk_positions.len() as u32, bag.chunk_count);
    assert_eq!(chunk_infos.len(), chunk_positions.len());
    for (i, (pos, start, end, counts)) in chunk_infos.iter().enumerate() {
        assert_eq!(*pos, chunk_positions[i]);
        let msgs: Vec<_> = bag.messages.iter().filter(|m| m.chunk == i).collect();
        assert_eq!(*start, msgs.iter().map(|m| m.time).min().unwrap());
        assert_eq!(*end, msgs.iter().map(|m| m.time).max().unwrap());
        let expect: BTreeMap<u32, u32> = chunk_msgs[i].iter().map(|(c, e)| (*c, e.len() as u32)).collect();
        assert_eq!(*counts, expect);
    }
    assert_eq!(trailing_conns, in_chunk_conns);
    assert_eq!(trailing_conns.len() as u32, bag.conn_count);
    bag.connections = trailing_conns;
    bag
}

#[derive(Debug, PartialEq)]
pub struct Header {
    pub seq: u32,
    pub stamp: (u32, u32),
    pub frame_id: String,
}

fn header(c: &mut Cursor) -> Header {
    Header {
        seq: c.u32(),
        stamp: (c.u32(), c.u32()),
        frame_id: c.string(),
    }
}

pub struct Image {
    pub header: Header,
    pub height: u32,
    pub width: u32,
    pub encoding: String,
    pub step: u32,
    pub data: Vec<u8>,
}

pub fn image(b: &[u8]) -> Image {
    let mut c = Cursor::new(b);
    let header = header(&mut c);
    let height = c.u32();
    let width = c.u32();
    let encoding = c.string();
    assert_eq!(c.u8(), 0, "big-endian flag");
    let step = c.u32();
    let n = c.u32() as usize;
    let data = c.take(n).to_vec();
    assert!(c.done());
    Image {
        header,
        height,
        width,
        encoding,
        step,
        data,
    }
}

pub struct Cloud {
    pub header: Header,
    pub fields: Vec<(String, u32, u8, u32)>,
    /// x, y, z, intensity, t
    pub points: Vec<(f32, f32, f32, f32, u32)>,
}

pub fn cloud(b: &[u8]) -> Cloud {
    let mut c = Cursor::new(b);
    let header = header(&mut c);
    assert_eq!(c.u32(), 1, "height");
    let width = c.u32() as usize;
    let nf = c.u32();
    let fields: Vec<_> = (0..nf).map(|_| (c.string(), c.u32(), c.u8(), c.u32())).collect();
    assert_eq!(c.u8(), 0);
    let step = c.u32() as usize;
    assert_eq!(c.u32() as usize, step * width, "row_step");
    let n = c.u32() as usize;
    assert_eq!(n, step * width);
    let data = c.take(n);
    assert_eq!(c.u8(), 1, "is_dense");
    assert!(c.done());
    let off = |name: &str| fields.iter().find(|f| f.0 == name).unwrap().1 as usize;
    let points = (0..width)
        .map(|i| {
            let p = &data[i * step..(i + 1) * step];
            let f = |o: usize| f32::from_le_bytes(p[o..o + 4].try_into().unwrap());
            let t = u32::from_le_bytes(p[off("t")..off("t") + 4].try_into().unwrap());
            (f(off("x")), f(off("y")), f(off("z")), f(off("intensity")), t)
        })
        .collect();
    Cloud { header, fields, points }
}

pub struct Odometry {
    pub header: Header,
    pub child_frame_id: String,
    pub position: [f64; 3],
    pub orientation: [f64; 4],
    pub linear: [f64; 3],
    pub angular: [f64; 3],
}

pub fn odometry(b: &[u8]) -> Odometry {
    let mut c = Cursor::new(b);
    let header = header(&mut c);
    let child_frame_id = c.string();
    let position = [c.f64(), c.f64(), c.f64()];
    let orientation = [c.f64(), c.f64(), c.f64(), c.f64()];
    for _ in 0..36 {
        c.f64();
    }
    let linear = [c.f64(), c.f64(), c.f64()];
    let angular = [c.f64(), c.f64(), c.f64()];
    for _ in 0..36 {
        c.f64();
    }
    assert!(c.done());
    Odometry {
        header,
        child_frame_id,
        position,
        orientation,
        linear,
        angular,
    }
}

pub struct Tf {
    pub header: Header,
    pub child: String,
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
}

pub fn tf(b: &[u8]) -> Vec<Tf> {
    let mut c = Cursor::new(b);
    let n = c.u32();
    let out = (0..n)
        .map(|_| Tf {
            header: header(&mut c),
            child: c.string(),
            translation: [c.f64(), c.f64(), c.f64()],
            rotation: [c.f64(), c.f64(), c.f64(), c.f64()],
        })
        .collect();
    assert!(c.done());
    out
}
