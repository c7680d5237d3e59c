//! Script protocol integration tests: golden traces, denial transparency,
//! and generated runs through every data-change mode.

use dynhom::hypergraph::Schema;
use dynhom::oracle::{random_change_script, DMode, ScriptLimits};
use dynhom::script::{render_script, Command};
use dynhom::session::{run_script, RunOptions};

fn run(script: &str, opts: RunOptions) -> (String, i32) {
    let mut out = Vec::new();
    let status = run_script(script.as_bytes(), &mut out, opts).unwrap();
    (String::from_utf8(out).unwrap(), status)
}

#[test]
fn golden_trace_with_snapshot() {
    let script = "# build a covered triangle, then inspect\n\
                  schema E/2 G/3\n\
                  domq 3\n\
                  domd 4\n\
                  insq G 0 1 2\n\
                  insq E 0 1\n\
                  setd E (1 2) (2 3)\n\
                  setd G (1 2 3)\n\
                  ask\n\
                  snapshot\n\
                  stats\n";
    let (out, status) = run(script, RunOptions::default());
    assert_eq!(status, 0);
    let expected = "ok\n\
                    ok\n\
                    ok\n\
                    applied diff=0\n\
                    applied diff=1\n\
                    applied\n\
                    applied\n\
                    yes\n\
                    F E(0,1) G(0,1,2) 2\n\
                    P E(0,1) E(0,1) E(0,1)\n\
                    P E(0,1) G(0,1,2) E(0,1)\n\
                    P E(0,1) G(0,1,2) G(0,1,2)\n\
                    P G(0,1,2) E(0,1) E(0,1)\n\
                    P G(0,1,2) E(0,1) G(0,1,2)\n\
                    P G(0,1,2) G(0,1,2) G(0,1,2)\n\
                    valid E(0,1) : (1,2)\n\
                    valid G(0,1,2) : (1,2,3)\n\
                    wQ=2 wF=2 maxdiff=1 denied=0\n";
    assert_eq!(out, expected);
}

#[test]
fn denied_lines_are_transparent() {
    // identical scripts except for one denial in the middle
    let with_denial = "schema E/2\n\
                       insq E 0 1\n\
                       insq E 1 2\n\
                       insq E 0 2\n\
                       insq E 2 3\n\
                       ask\n\
                       snapshot\n";
    let without = "schema E/2\n\
                   insq E 0 1\n\
                   insq E 1 2\n\
                   insq E 2 3\n\
                   ask\n\
                   snapshot\n";
    let (a, sa) = run(with_denial, RunOptions::default());
    let (b, sb) = run(without, RunOptions::default());
    assert_eq!(sa, 0);
    assert_eq!(sb, 0);
    let a_lines: Vec<&str> = a.lines().filter(|l| *l != "denied").collect();
    let b_lines: Vec<&str> = b.lines().collect();
    assert_eq!(a_lines, b_lines);
    assert_eq!(a.lines().filter(|l| *l == "denied").count(), 1);
}

#[test]
fn tuple_mode_scripts_replay_clean_with_periodic_checks() {
    let schema = Schema::new(vec![("E".to_string(), 2), ("F".to_string(), 1)]).unwrap();
    let limits = ScriptLimits {
        d_mode: DMode::Tuples,
        ..Default::default()
    };
    for seed in 0..6u64 {
        let mut cmds = random_change_script(&schema, 150, &limits, seed);
        cmds.push(Command::Check);
        let text = render_script(&cmds);
        let (out, status) = run(
            &text,
            RunOptions {
                quiet: true,
                check_every: Some(25),
            },
        );
        assert_eq!(status, 0, "seed {seed}: {out}");
        assert!(!out.contains("error"), "seed {seed}: {out}");
        assert!(!out.contains("check failed"), "seed {seed}: {out}");
        assert!(out.ends_with("check ok\n"), "seed {seed}");
        // the script must actually exercise single-tuple data changes
        assert!(
            cmds.iter()
                .any(|c| matches!(c, Command::InsD { .. } | Command::DelD { .. })),
            "seed {seed}"
        );
    }
}

#[test]
fn tuple_mode_answers_match_brute_force_per_change() {
    use dynhom::oracle::brute_hom;
    use dynhom::session::Session;
    let schema = Schema::new(vec![("E".to_string(), 2), ("F".to_string(), 1)]).unwrap();
    let limits = ScriptLimits {
        d_mode: DMode::Tuples,
        ..Default::default()
    };
    let mut checks = 0u32;
    for seed in 0..8u64 {
        let cmds = random_change_script(&schema, 120, &limits, seed);
        let mut session: Option<Session> = None;
        for cmd in &cmds {
            match cmd {
                Command::Schema(rels) => {
                    session = Some(Session::new(Schema::new(rels.clone()).unwrap(), 64, 64));
                }
                cmd => {
                    let s = session.as_mut().unwrap();
                    let line = s.apply(cmd).unwrap();
                    if line.starts_with("applied") {
                        assert_eq!(
                            s.engine().answer(),
                            brute_hom(s.query(), s.engine().data()).0,
                            "seed {seed}"
                        );
                        checks += 1;
                    }
                }
            }
        }
    }
    assert!(checks > 300);
}

#[test]
fn domain_commands_lock_after_use() {
    let (out, status) = run("schema E/2\ninsq E 0 1\ndomq 8\n", RunOptions::default());
    assert!(out.ends_with("error domain-locked\n"), "{out}");
    assert_eq!(status, 1);
    let (out, status) = run(
        "schema E/2\ndomq 4\ninsq E 0 3\ninsq E 0 4\n",
        RunOptions::default(),
    );
    assert!(out.ends_with("error node-out-of-domain\n"), "{out}");
    assert_eq!(status, 1);
}

#[test]
fn state_errors_report_and_continue() {
    let script = "schema E/2\n\
                  insq E 0 1\n\
                  insq E 0 1\n\
                  delq E 5 6\n\
                  ask\n";
    let (out, status) = run(script, RunOptions::default());
    assert_eq!(
        out,
        "ok\napplied diff=0\nerror duplicate-edge\nerror edge-not-present\nno\n"
    );
    assert_eq!(status, 1);
}
