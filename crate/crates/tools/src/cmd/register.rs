use crate::cli::{RegisterArgs, RegisterMethod};
use crate::error::{Result, ToolError};
use crate::io::{load_xyz, write_file, Model};
use crate::pipeline::register_icp;
use dcp_core::dataio::format_xyz;
use dcp_core::geometry::{apply_transform, RigidTransform};
use dcp_core::icp::{closest_point_objective, IcpConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    pub transform: RigidTransform,
    /// Mean squared closest-point distance after alignment.
    pub objective: f64,
}

impl Registration {
    /// Rotation row-major, then translation, space separated.
    pub fn row_major_line(&self) -> String {
        self.transform
            .to_row_major()
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn register(a: &RegisterArgs) -> Result<Registration> {
    let model = match (a.method, &a.checkpoint) {
        (RegisterMethod::Icp, _) => None,
        (_, None) => return Err(ToolError::usage("the dcp methods need --checkpoint")),
        (_, Some(p)) => {
            if !p.is_file() {
                return Err(ToolError::usage(format!(
                    "checkpoint {} does not exist",
                    p.display()
                )));
            }
            Some(Model::load(p)?)
        }
    };
    if let Some(m) = &model {
        let attention = m.config().attention;
        if (a.method == RegisterMethod::DcpV1 && attention)
            || (a.method == RegisterMethod::DcpV2 && !attention)
        {
            return Err(ToolError::usage(format!(
                "checkpoint is a {} model",
                if attention { "dcp-v2" } else { "dcp-v1" }
            )));
        }
    }
    let x = load_xyz(&a.source)?;
    let y = load_xyz(&a.target)?;
    let icp = IcpConfig {
        max_iters: a.max_iters,
        tol: a.tol,
        ..IcpConfig::default()
    };
    let transform = match (&model, a.method) {
        (None, _) => register_icp(&x, &y, &RigidTransform::identity(), &icp)
            .map_err(|e| ToolError::icp(&a.source, e))?,
        (Some(m), method) => {
            let t = m
                .predict(&[(&x, &y)], 1)
                .map_err(|e| ToolError::model(&a.source, e))?[0];
            if method == RegisterMethod::DcpIcp {
                register_icp(&x, &y, &t, &icp).map_err(|e| ToolError::icp(&a.source, e))?
            } else {
                t
            }
        }
    };
    if let Some(out) = &a.output {
        write_file(out, format_xyz(&apply_transform(&transform, &x)))?;
    }
    Ok(Registration {
        transform,
        objective: closest_point_objective(&x, &y, &transform),
    })
}
