//! Encode a few messages, decode them back, and show how stale and
//! malformed frames are treated.

use micromobility_sim::wire::{
    decode_str, encode, FsrPayload, ImuPayload, Payload, SeqTable, Staleness, WireMessage,
};

fn main() {
    let msgs = [
        WireMessage::new("handlebar", 1, 0, Payload::Hello),
        WireMessage::new(
            "handlebar",
            2,
            10,
            Payload::Imu(ImuPayload::Euler {
                pitch: 1.5,
                roll: -3.0,
                yaw: 12.25,
            }),
        ),
        WireMessage::new(
            "insoles",
            7,
            10,
            Payload::Fsr(FsrPayload {
                front: 2100,
                rear: 380,
            }),
        ),
    ];
    for m in &msgs {
        let frame = encode(m).unwrap();
        print!("{frame}");
        assert_eq!(&decode_str(&frame).unwrap(), m);
    }

    let mut seqs = SeqTable::default();
    for seq in [3, 4, 4, 2, 9] {
        let m = WireMessage::new("handlebar", seq, 0, Payload::Hello);
        let verdict = seqs.admit(&m);
        println!(
            "seq {seq}: {}",
            if verdict == Staleness::Accept {
                "accept"
            } else {
                "drop"
            }
        );
    }

    for bad in [
        "{\"v\":1,\"kind\":\"imu\"",
        "{\"v\":1,\"kind\":\"teleport\",\"sender\":\"x\",\"seq\":1,\"t_ms\":0,\"payload\":{}}",
        "{\"v\":1,\"kind\":\"fsr\",\"sender\":\"x\",\"seq\":1,\"t_ms\":0,\"payload\":{\"front\":5000,\"rear\":0}}",
    ] {
        println!("{}", decode_str(bad).unwrap_err());
    }
}
