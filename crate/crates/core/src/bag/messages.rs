//! ROS1 message serialization for the exported types.

use crate::model::{CameraImage, ImageEncoding, InsRecord, PointCloud, RigidTransform};

/// A message type: its name, definition hash and full definition text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MessageType {
    pub name: &'static str,
    pub md5sum: &'static str,
    main: &'static str,
    deps: &'static [(&'static str, &'static str)],
}

impl MessageType {
    /// Definition text as carried in connection headers: the main definition
    /// followed by each dependency under a `MSG:` separator.
    pub fn definition(&self) -> String {
        let mut out = self.main.to_string();
        for (name, text) in self.deps {
            out.push_str(&"=".repeat(80));
            out.push_str("\nMSG: ");
            out.push_str(name);
            out.push('\n');
            out.push_str(text);
        }
        out
    }
}

const HEADER: (&str, &str) = ("std_msgs/Header", "uint32 seq\ntime stamp\nstring frame_id\n");
const POINT: (&str, &str) = ("geometry_msgs/Point", "float64 x\nfloat64 y\nfloat64 z\n");
const QUATERNION: (&str, &str) = ("geometry_msgs/Quaternion", "float64 x\nfloat64 y\nfloat64 z\nfloat64 w\n");
const VECTOR3: (&str, &str) = ("geometry_msgs/Vector3", "float64 x\nfloat64 y\nfloat64 z\n");

pub const IMAGE: MessageType = MessageType {
    name: "sensor_msgs/Image",
    md5sum: "060021388200f6f0f447d0fcd9c64743",
    main: "std_msgs/Header header\nuint32 height\nuint32 width\nstring encoding\nuint8 is_bigendian\nuint32 step\nuint8[] data\n",
    deps: &[HEADER],
};

pub const POINT_CLOUD2: MessageType = MessageType {
    name: "sensor_msgs/PointCloud2",
    md5sum: "1158d486dd51d683ce2f1be655c3c181",
    main: "std_msgs/Header header\nuint32 height\nuint32 width\nsensor_msgs/PointField[] fields\nbool is_bigendian\nuint32 point_step\nuint32 row_step\nuint8[] data\nbool is_dense\n",
    deps: &[
        HEADER,
        (
            "sensor_msgs/PointField",
            "uint8 INT8=1\nuint8 UINT8=2\nuint8 INT16=3\nuint8 UINT16=4\nuint8 INT32=5\nuint8 UINT32=6\nuint8 FLOAT32=7\nuint8 FLOAT64=8\nstring name\nuint32 offset\nuint8 datatype\nuint32 count\n",
        ),
    ],
};

pub const ODOMETRY: MessageType = MessageType {
    name: "nav_msgs/Odometry",
    md5sum: "cd5e73d190d741a2f92e81eda573aca7",
    main: "std_msgs/Header header\nstring child_frame_id\ngeometry_msgs/PoseWithCovariance pose\ngeometry_msgs/TwistWithCovariance twist\n",
    deps: &[
        HEADER,
        ("geometry_msgs/PoseWithCovariance", "geometry_msgs/Pose pose\nfloat64[36] covariance\n"),
        ("geometry_msgs/Pose", "geometry_msgs/Point position\ngeometry_msgs/Quaternion orientation\n"),
        POINT,
        QUATERNION,
        ("geometry_msgs/TwistWithCovariance", "geometry_msgs/Twist twist\nfloat64[36] covariance\n"),
        ("geometry_msgs/Twist", "geometry_msgs/Vector3 linear\ngeometry_msgs/Vector3 angular\n"),
        VECTOR3,
    ],
};

pub const TF_MESSAGE: MessageType = MessageType {
    name: "tf2_msgs/TFMessage",
    md5sum: "94810edda583a504dfda3829e70d7eec",
    main: "geometry_msgs/TransformStamped[] transforms\n",
    deps: &[
        ("geometry_msgs/TransformStamped", "std_msgs/Header header\nstring child_frame_id\ngeometry_msgs/Transform transform\n"),
        HEADER,
        ("geometry_msgs/Transform", "geometry_msgs/Vector3 translation\ngeometry_msgs/Quaternion rotation\n"),
        VECTOR3,
        QUATERNION,
    ],
};

/// `sensor_msgs/PointField` datatype codes.
pub const FLOAT32: u8 = 7;
pub const UINT32: u8 = 6;

/// Bytes per exported point: x, y, z, intensity as f32 and t as u32.
pub const POINT_STEP: u32 = 20;

/// ROS time: whole seconds and the nanosecond remainder.
pub fn split_time(ns: u64) -> Option<(u32, u32)> {
    let sec = u32::try_from(ns / 1_000_000_000).ok()?;
    Some((sec, (ns % 1_000_000_000) as u32))
}

#[derive(Default)]
struct Ser(Vec<u8>);

impl Ser {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
    fn string(&mut self, s: &str) {
        self.bytes(s.as_bytes());
    }
    fn header(&mut self, seq: u32, stamp: (u32, u32), frame_id: &str) {
        self.u32(seq);
        self.u32(stamp.0);
        self.u32(stamp.1);
        self.string(frame_id);
    }
}

pub fn encoding_name(e: ImageEncoding) -> &'static str {
    match e {
        ImageEncoding::Rgb8 => "rgb8",
        ImageEncoding::Bgr8 => "bgr8",
        ImageEncoding::Mono8 => "mono8",
    }
}

/// `sensor_msgs/Image` with a tightly packed row step.
pub fn serialize_image(img: &CameraImage, seq: u32, stamp: (u32, u32), frame_id: &str) -> Vec<u8> {
    let mut s = Ser(Vec::with_capacity(img.pixels.len() + 64));
    s.header(seq, stamp, frame_id);
    s.u32(img.height);
    s.u32(img.width);
    s.string(encoding_name(img.encoding));
    s.u8(0);
    s.u32(img.width * img.channels() as u32);
    s.bytes(&img.pixels);
    s.0
}

/// `sensor_msgs/PointCloud2`, one row of `n` points with fields
/// x/y/z/intensity (float32) and t (uint32, nanoseconds after scan start).
pub fn serialize_point_cloud(cloud: &PointCloud, seq: u32, stamp: (u32, u32), frame_id: &str) -> Vec<u8> {
    let n = cloud.points.len() as u32;
    let mut s = Ser(Vec::with_capacity(cloud.points.len() * POINT_STEP as usize + 128));
    s.header(seq, stamp, frame_id);
    s.u32(1);
    s.u32(n);
    let fields: [(&str, u32, u8); 5] = [("x", 0, FLOAT32), ("y", 4, FLOAT32), ("z", 8, FLOAT32), ("intensity", 12, FLOAT32), ("t", 16, UINT32)];
    s.u32(fields.len() as u32);
    for (name, offset, datatype) in fields {
        s.string(name);
        s.u32(offset);
        s.u8(datatype);
        s.u32(1);
    }
    s.u8(0);
    s.u32(POINT_STEP);
    s.u32(POINT_STEP * n);
    s.u32(POINT_STEP * n);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            s.0.extend_from_slice(&v.to_le_bytes());
        }
        s.u32(p.dt_ns);
    }
    s.u8(1);
    s.0
}

/// `nav_msgs/Odometry` for one INS solution. The pose position carries
/// latitude and longitude in degrees and altitude in metres (frame
/// `wgs84`), the orientation is the body-to-world quaternion, and the twist
/// holds body-frame velocity and angular rate. Covariances are zero.
pub fn serialize_odometry(ins: &InsRecord, seq: u32, stamp: (u32, u32), child_frame_id: &str) -> Vec<u8> {
    let mut s = Ser(Vec::with_capacity(720));
    s.header(seq, stamp, "wgs84");
    s.string(child_frame_id);
    for v in [ins.latitude, ins.longitude, ins.altitude] {
        s.f64(v);
    }
    for v in ins.orientation {
        s.f64(v);
    }
    for _ in 0..36 {
        s.f64(0.0);
    }
    for v in ins.velocity.iter().chain(&ins.angular_rate) {
        s.f64(*v);
    }
    for _ in 0..36 {
        s.f64(0.0);
    }
    s.0
}

/// One transform of a `tf2_msgs/TFMessage`: `parent_from_child` maps child
/// coordinates into the parent frame.
pub struct StampedTransform<'a> {
    pub parent: &'a str,
    pub child: &'a str,
    pub parent_from_child: RigidTransform,
}

pub fn serialize_tf(transforms: &[StampedTransform<'_>], stamp: (u32, u32)) -> Vec<u8> {
    let mut s = Ser::default();
    s.u32(transforms.len() as u32);
    for (seq, t) in transforms.iter().enumerate() {
        s.header(seq as u32, stamp, t.parent);
        s.string(t.child);
        for v in t.parent_from_child.translation().iter() {
            s.f64(*v);
        }
        for v in t.parent_from_child.quaternion() {
            s.f64(v);
        }
    }
    s.0
}
